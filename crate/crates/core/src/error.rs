use thiserror::Error;

use crate::dataset::DatasetError;
use crate::metrics::MetricsError;
use crate::netlist::NetlistError;
use crate::neuralnet::NeuralError;
use crate::reliability::ReliabilityError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Netlist(e) => e.code(),
            Error::Solver(e) => e.code(),
            Error::Reliability(e) => e.code(),
            Error::Dataset(e) => e.code(),
            Error::Neural(e) => e.code(),
            Error::Metrics(e) => e.code(),
            Error::File { .. } | Error::Io(_) => "Io",
            Error::Json(_) => "MalformedJson",
            Error::Usage(_) => "Usage",
        }
    }

    pub fn file(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
