//! Normal forms around a finite-gap torus of the derivative NLS lattice:
//! the KAM iteration that builds the torus, and the partial Birkhoff normal
//! form with the x-dependence removal rounds used for long-time stability.

pub mod birkhoff;
pub mod classes;
pub mod error;
pub mod homological;
pub mod kam;
pub mod xremove;

pub use birkhoff::{
    birkhoff_step, class_of, classify_terms, run_birkhoff, BirkhoffConfig, BirkhoffRow, BirkhoffRun, BirkhoffStep,
    Classified, TermClass,
};
pub use error::{EngineError, Result};
pub use homological::{solve_class, ClassOptions, ClassReport};
pub use kam::{
    assemble_homological_rhs, compose_step, kam_solve_step, resonance_scan, run_kam, Component, KamOptions, KamRun,
    KamSchedule, NormalIncrement, StepResult,
};
pub use xremove::{from_w_basis, remove_x_dependence, to_w_basis, xy_part, WBasis, XRemoval, XRemovalConfig};
