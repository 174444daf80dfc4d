//! Experiment harness for bi-fidelity surrogates: configuration, data
//! splits, replication protocols and result files.

pub mod config;
pub mod data_io;
pub mod error;
pub mod experiment;
pub mod methods;
pub mod metrics;
pub mod normalize;
pub mod output;
pub mod seeds;

pub use config::{ExperimentConfig, Method};
pub use error::{HarnessError, Result};
