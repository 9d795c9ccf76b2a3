use thiserror::Error;

#[derive(Debug, Error)]
pub enum DnlsError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("implicit midpoint failed to converge at t={t} (increment {step:e})")]
    Midpoint { t: f64, step: f64 },
    #[error("step rejected at t={t}: relative energy jump {jump:e} after {retries} halvings")]
    Rejected { t: f64, jump: f64, retries: usize },
    #[error(transparent)]
    Core(#[from] nf_core::Error),
}

pub type Result<T> = std::result::Result<T, DnlsError>;
