//! Reaction-diffusion systems with time-dependent coefficients: IMEX simulation,
//! Turing dispersion analysis, and decay certificates from a scalar
//! differential inequality for the `L2` norm.

pub mod apriori;
pub mod certificates;
pub mod error;
pub mod grid;
pub mod inequality;
pub mod profiles;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
