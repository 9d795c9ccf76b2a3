//! The derivative NLS lattice: Hamiltonian in action-angle form and a spectral
//! split-step simulator.

pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod lattice;

pub use config::DnlsConfig;
pub use error::{DnlsError, Result};
pub use hamiltonian::{build_hamiltonian, Model};
pub use lattice::{from_lattice, to_lattice, LatticeState, Simulator, StepControl};
