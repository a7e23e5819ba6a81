//! Scenario files, run-parallel Monte Carlo, CSV artifacts and plots for
//! doubly adaptive social learning. The numerical kernels live in
//! [`a2sl_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod plot;
pub mod report;

pub use a2sl_core as core;
pub use error::{CliError, Result};
