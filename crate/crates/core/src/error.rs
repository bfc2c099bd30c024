use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("neuron {neuron} reached a non-finite state at step {step}")]
    NonFiniteState { neuron: usize, step: u32 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("schema error in {field}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Schema {
        field: String,
        line: Option<usize>,
        message: String,
    },

    #[error("unsupported format version {found:?} (expected \"v1\")")]
    Version { found: String },

    #[error("{field} out of range: {message}")]
    Range { field: String, message: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("clustering mismatch: {0}")]
    MismatchedClustering(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("deadlock detected at cycle {cycle}: no packet moved for {stalled} cycles with {in_flight} in flight")]
    DeadlockDetected {
        cycle: u64,
        stalled: u64,
        in_flight: usize,
    },

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("metric needs at least 2 spikes, got {0}")]
    InsufficientSpikes(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("timed out after {0:.1} s")]
    Timeout(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Simulation,
}

impl Error {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            line: None,
            message: message.into(),
        }
    }

    pub fn range(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Range {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Stable variant name, printed on the command line.
    pub fn name(&self) -> &'static str {
        match self.root() {
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::InvalidNetwork(_) => "InvalidNetwork",
            Error::Schema { .. } => "SchemaError",
            Error::Version { .. } => "VersionError",
            Error::Range { .. } => "RangeError",
            Error::Infeasible(_) => "Infeasible",
            Error::MismatchedClustering(_) => "MismatchedClustering",
            Error::InvalidPlacement(_) => "InvalidPlacement",
            Error::DeadlockDetected { .. } => "DeadlockDetected",
            Error::CapacityExceeded(_) => "CapacityExceeded",
            Error::InsufficientSpikes(_) => "InsufficientSpikes",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Timeout(_) => "Timeout",
            Error::Io { .. } => "IoError",
            Error::Stage { .. } => unreachable!("root() strips stage labels"),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::NonFiniteState { .. }
            | Error::Infeasible(_)
            | Error::DeadlockDetected { .. }
            | Error::InsufficientSpikes(_)
            | Error::Timeout(_) => ErrorClass::Simulation,
            _ => ErrorClass::Validation,
        }
    }
}
