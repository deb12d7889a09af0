//! Quantifies the performance lost when a planar (far-field) wavefront model
//! is used for signals that actually follow a spherical (near-field) wavefront.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: arrays, OFDM grids, noise, Fraunhofer distance.
//! - [`wavefront`]: spherical and planar array responses with analytic Jacobians.
//! - [`channel`]: stochastic MIMO channels (partial LoS blockage, Rayleigh) and covariances.
//! - [`bounds`]: Fisher information, PEB, pseudo-true fit and the misspecified bound.
//! - [`estimators`]: LMMSE channel estimation and detection, Monte Carlo SER.
//! - [`metrics`]: KL divergence, covariance deviation, spatial DoF, ergodic capacity.
//! - [`scenarios`]: declarative sweeps that produce the heatmap data files.
//! - [`cli`]: the `nearfar` command-line front end.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scenarios;
pub mod wavefront;

pub use error::{Error, Result};
pub use num_complex::Complex64;
