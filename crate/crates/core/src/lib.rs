//! Simulation of a Jaynes-Cummings qubit–oscillator system whose qubit
//! excitation is monitored continuously.
//!
//! * [`algebra`]: dense complex operators and density matrices.
//! * [`model`]: the Hamiltonian, ladder operators and excitation subspaces.
//! * [`sme`]: conditioned and unconditioned trajectory integration.
//! * [`analysis`]: ensembles, purity fits, collapse and jump metrics.
//! * [`io`]: CSV and JSON persistence.

pub mod algebra;
pub mod analysis;
pub mod error;
pub mod io;
pub mod model;
pub mod sme;

pub use algebra::{ComplexOperator, DensityMatrix, C64};
pub use analysis::{EnsembleSummary, PurityFit};
pub use error::{Error, Result};
pub use model::{JointOperators, ModelConfig, Qubit};
pub use sme::{SimulationConfig, TrajectoryRecord};
