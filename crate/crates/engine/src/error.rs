use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Core(#[from] nf_core::Error),
    #[error("resonance at k={k:?}, l={l:?}: |divisor| = {divisor:e} <= {bound:e}")]
    Resonance { k: Vec<i32>, l: Vec<(i32, i32)>, divisor: f64, bound: f64 },
    #[error("perturbation stopped decaying at step {0}")]
    Divergence(usize),
    #[error("momentum class violated: {0}")]
    Momentum(String),
    #[error("homological residual {residual:e} above {tol:e}")]
    Homological { residual: f64, tol: f64 },
    #[error("x-dependence {defect:e} survived {rounds} rounds")]
    Rounds { rounds: usize, defect: f64 },
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

impl EngineError {
    /// Small-divisor failures, as opposed to numerical ones.
    pub fn is_resonance(&self) -> bool {
        matches!(self, EngineError::Resonance { .. } | EngineError::Core(nf_core::Error::Resonance { .. }))
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
