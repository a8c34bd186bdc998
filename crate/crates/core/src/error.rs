use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),

    #[error("invalid limits: {0}")]
    InvalidLimits(String),

    #[error("invalid platoon configuration: {0}")]
    InvalidConfiguration(String),

    #[error("configurations disagree: {0}")]
    ConfigurationMismatch(String),

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("invalid dual certificate: {0}")]
    InvalidCertificate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("maneuver infeasible: {0}")]
    Infeasible(String),

    #[error("no table entry for configuration pair ({initial}, {target})")]
    KeyNotFound { initial: String, target: String },

    #[error("shared plan for vehicle {vehicle} covers {got} steps but {needed} are required")]
    InsufficientHorizon { vehicle: String, needed: usize, got: usize },

    #[error("ACC primitive of vehicle {vehicle} references missing front vehicle {front}")]
    MissingFrontVehicle { vehicle: u32, front: u32 },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("path follower failed at step {step}: {reason}")]
    Follower { step: usize, reason: String },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("unsupported table format version {0}")]
    FormatVersion(u32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
