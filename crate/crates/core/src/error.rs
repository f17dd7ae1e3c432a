use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KcmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KcmError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("conformation has {got} dihedral angles, topology expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conformation contains a non-finite angle at position {0}")]
    NonFiniteAngle(usize),

    #[error("atoms {a} ({a_name}) and {b} ({b_name}) are {distance:.4} Å apart, below the 0.1 Å singularity guard")]
    NearSingularity {
        a: usize,
        a_name: String,
        b: usize,
        b_name: String,
        distance: f64,
    },

    #[error("cone angle undefined: end-to-end displacement from the reference is zero")]
    UndefinedAngle,

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KcmError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Self::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
