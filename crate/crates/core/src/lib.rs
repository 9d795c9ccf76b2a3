//! Fourier-Taylor Hamiltonian series on `T^n x R^n x l^2`, with the Poisson
//! structure of the derivative NLS lattice and the small-divisor solvers used
//! by the normal-form engines.

pub mod bracket;
pub mod error;
pub mod fourier;
pub mod lie;
pub mod modes;
pub mod normal;
pub mod norms;
pub mod point;
pub mod random;
pub mod serial;
pub mod series;
pub mod solve;
pub mod vfield;

pub use bracket::poisson_bracket;
pub use error::{Error, Result};
pub use fourier::{norm_coeff, Fourier};
pub use lie::{lie_increment, lie_transform, LieOutcome, LiePlan};
pub use modes::{momentum, ModeSystem, TermIndex};
pub use normal::NormalForm;
pub use norms::{majorant_norms, DomainSpec};
pub use point::{evaluate, PhasePoint};
pub use series::HamSeries;
pub use vfield::{vector_field, vf_norm, SampleGrid, VectorFieldEval};

pub use num_complex::Complex64 as C64;
