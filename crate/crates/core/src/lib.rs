//! Sequential Monte Carlo state estimation.
//!
//! The crate provides two families of particle filters for general state
//! space models — accept-reject filters drawing i.i.d. samples from the
//! mixture posterior, and sampling-importance-resampling (SIR) filters with
//! a choice of four resampling schemes — together with Monte Carlo backward
//! smoothing, likelihood estimation, and exact discrete-HMM / Kalman
//! reference implementations used to validate the stochastic machinery.

pub mod error;
pub mod exact;
pub mod filter;
pub mod models;
pub mod reject;
pub mod resample;
pub mod rng;
pub mod smoother;
pub mod ssm;
pub mod util;

pub use error::{Error, Result};
