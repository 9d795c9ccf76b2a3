use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] nf_core::Error),
    #[error(transparent)]
    Engine(#[from] nf_engine::EngineError),
    #[error(transparent)]
    Dnls(#[from] nf_dnls::DnlsError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
