use thiserror::Error;

/// Failure of a run, with the process exit status it maps to.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Schema(String),
    #[error("{0}")]
    Math(String),
    #[error("resonance abort: {0}")]
    Resonance(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Math(_) | RunError::Io(_) => 3,
            RunError::Resonance(_) => 4,
        }
    }
}

impl From<nf_core::Error> for RunError {
    fn from(e: nf_core::Error) -> Self {
        match e {
            nf_core::Error::Resonance { .. } => RunError::Resonance(e.to_string()),
            nf_core::Error::Invalid(_) => RunError::Schema(e.to_string()),
            _ => RunError::Math(e.to_string()),
        }
    }
}

impl From<nf_engine::EngineError> for RunError {
    fn from(e: nf_engine::EngineError) -> Self {
        match e {
            nf_engine::EngineError::Core(c) => c.into(),
            nf_engine::EngineError::Config(_) => RunError::Schema(e.to_string()),
            _ if e.is_resonance() => RunError::Resonance(e.to_string()),
            _ => RunError::Math(e.to_string()),
        }
    }
}

impl From<nf_dnls::DnlsError> for RunError {
    fn from(e: nf_dnls::DnlsError) -> Self {
        RunError::Math(e.to_string())
    }
}

impl From<nf_lab::LabError> for RunError {
    fn from(e: nf_lab::LabError) -> Self {
        match e {
            nf_lab::LabError::Core(c) => c.into(),
            nf_lab::LabError::Engine(c) => c.into(),
            nf_lab::LabError::Dnls(c) => c.into(),
            nf_lab::LabError::Config(_) => RunError::Schema(e.to_string()),
        }
    }
}
