use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point ({x}, {y}) lies inside the obstacle (clearance {clearance})")]
    InsideObstacle { x: f64, y: f64, clearance: f64 },
    #[error("sphere radius must be positive and finite, got {radius}")]
    InvalidSphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("expected {expected} {what} values, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}[{index}] = {value} outside [{low}, {high}]")]
    OutOfBounds {
        what: &'static str,
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("behavior value is not a number in dimension {dim}")]
    NonFiniteBehavior { dim: usize },
    #[error("behavior vector has {got} values, space has {expected} dimensions")]
    BehaviorArity { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("{failed} of {total} trials failed")]
    TrialsFailed { failed: usize, total: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
