use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {0} is not a normal site of the lattice")]
    Site(i32),
    #[error("operands live on different mode systems")]
    ModeMismatch,
    #[error("norm overflowed the float range")]
    Overflow,
    #[error("resonance at k={k:?} (divisor {divisor:e})")]
    Resonance { k: Vec<i32>, divisor: f64 },
    #[error("right-hand side has nonzero mean {0:e}")]
    NonzeroMean(f64),
    #[error("picard iteration did not contract after {0} steps")]
    Picard(usize),
    #[error("change of variables leaves the strip: {0}")]
    Strip(String),
    #[error("residual {residual:e} above tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("dense oracle refuses {0} unknowns")]
    OracleSize(usize),
    #[error("truncated operator is singular")]
    Singular,
    #[error("lie series diverges: {0}")]
    Gate(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
