//! Experiment runner for the bandit algorithms: configuration, simulation
//! matrices, regret-bound checks, oracle comparisons and result files.

pub mod bounds;
pub mod config;
pub mod error;
pub mod oracle_check;
pub mod output;
pub mod simulate;

pub use error::{HarnessError, Result};

/// Version string recorded in every report.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
