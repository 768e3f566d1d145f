//! Simulation and data-driven identification of stochastic differential
//! equations driven by symmetric α-stable Lévy noise.

pub mod alpha_est;
pub mod cli_io;
pub mod error;
pub mod estimator;
pub mod io_util;
pub mod neural;
pub mod quadrature;
pub mod sde_sim;
pub mod stable_dist;
pub mod stats;

pub use error::{Error, Result};
