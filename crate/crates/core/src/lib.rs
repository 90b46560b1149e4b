//! Local hidden-field simulator for the EPRB experiment.
//!
//! The crate follows the chain from initial data to Bell statistics:
//!
//! * [`geometry`]: light-cone bases on the `t = 0` Cauchy slice, the domains
//!   `Ω_a`, `Ω_b`, `Σ_a`, `Σ_b`, `Σ_c`, the `Σ_c` radius and setting-choice audits.
//! * [`fields`]: Gaussian random initial fields on a lattice, with a block
//!   covariance that switches the factorization hypothesis on or off.
//! * [`propagation`]: d'Alembert evolution of the Cauchy data with strict causal
//!   support, plus a bounded-noise Langevin pre-evolution.
//! * [`detection`]: analyzer functionals, outcome oracles and single trials.
//! * [`inference`]: correlation estimators, CHSH evaluation and the
//!   joint-distribution feasibility test.
//! * [`scenario`]: the strict JSON scenario schema.
//!
//! All units are natural (`c = 1`).

pub mod detection;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod inference;
pub mod propagation;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
