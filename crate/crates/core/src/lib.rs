//! Adaptive cardinality estimation workbench.
//!
//! A cost-based optimizer whose cardinality estimator learns from the
//! execution statistics of earlier queries. See the crate README for the
//! experiment loop and the command-line driver.

pub mod bench;
pub mod catalog;
pub mod config;
pub mod error;
pub mod executor;
pub mod learner;
pub mod optimizer;
pub mod plan;
pub mod stats;

pub use error::{Error, Result};
