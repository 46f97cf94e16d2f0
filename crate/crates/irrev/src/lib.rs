//! Toolkit for stationary Gauss-Markov models with rational spectra: scalar and
//! matrix spectral factorization, forward/backward state-space realizations and
//! the inner function linking their driving noises, the lossless one-port hiding
//! behind that inner function, finite heat-bath models with exact canonical
//! flows, seeded path simulation, and the statistical estimators used to verify
//! all of it against closed-form predictions.

pub mod error;
pub mod tol;

pub mod grid;
pub mod linalg;
pub mod polyrat;
pub mod quad;
pub mod rng;

pub mod bath;
pub mod estimate;
pub mod lossless;
pub mod realization;
pub mod simulate;
pub mod spectral;
pub mod synth;

pub mod verify;

pub use error::{Error, Result};
