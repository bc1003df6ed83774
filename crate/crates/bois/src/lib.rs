//! Parallel Bayesian optimisation for families of variational-quantum-eigensolver
//! problems.
//!
//! An array of Gaussian-process Bayesian optimizers, one per physical-parameter
//! grid point, shares circuit measurement results: the Pauli expectations taken
//! for one grid point's cost are re-weighted into every other point's energy,
//! so each optimizer learns from its neighbours' evaluations at no extra
//! circuit cost. The crate bundles the simulated quantum backend, an exact
//! diagonalization oracle, and an adaptive ansatz builder alongside the
//! optimizer array itself.

pub mod bo;
pub mod builder;
pub mod circuit;
pub mod cli;
pub mod error;
pub mod gp;
pub mod oracle;
pub mod orchestrator;
pub mod pauli;
pub mod stream;

pub(crate) mod optim;

pub use error::{Error, Result};
