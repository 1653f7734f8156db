//! Experiment configuration, grid runner, randomized verification suites and
//! plotting for the `gradflow` command-line tool.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod runner;
pub mod suites;

use std::path::{Path, PathBuf};

use thiserror::Error;

use gradflow::graph::GraphError;
use gradflow::model::ModelError;
use gradflow::oracles::OracleError;
use gradflow::train::TrainError;

pub use config::{Command, ExperimentSpec};
pub use runner::{run, CommandReport, RunOptions};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] GraphError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Train(TrainError),
}

impl From<TrainError> for ExperimentError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(m) => ExperimentError::Config(m),
            TrainError::Graph(g) => ExperimentError::Data(g),
            other => ExperimentError::Train(other),
        }
    }
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for unreadable or inconsistent data,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    std::fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}
