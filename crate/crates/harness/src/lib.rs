//! Experiment orchestration for the dcop solver: configuration, the run grid,
//! result storage and report generation.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod report;
pub mod runner;
pub mod seeds;
pub mod store;

pub use config::{ExperimentConfig, Settings};
pub use store::Store;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("missing optima for {0}; run `dcop oracle` first or drop --no-oracle")]
    MissingOptima(String),
    #[error(transparent)]
    Engine(#[from] dcop::engine::EngineError),
    #[error(transparent)]
    Trace(#[from] dcop::trace::TraceError),
    #[error(transparent)]
    Optima(#[from] dcop::optima::OptimaError),
    #[error(transparent)]
    Stats(#[from] dcop::stats::StatsError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}
