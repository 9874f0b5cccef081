use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AdamantError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AdamantError {
    /// Malformed or non-finite input data.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix must be column-centered before this operation")]
    NotCentered,

    #[error("matrix has numerical rank zero")]
    RankZero,

    /// A quantity that must be nonzero (a trace, a norm, a variance) vanished.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("heritability is unidentifiable: tr(G^2) is within {tolerance:e} of n = {n}")]
    Unidentifiable { n: usize, tolerance: f64 },

    #[error("band {band} contains no frequency bins at this resolution")]
    BandResolution { band: String },

    #[error("channel {channel} has zero power in band {band}")]
    DegenerateChannel { channel: usize, band: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl AdamantError {
    /// Process exit code: 3 for numerical degeneracy, 2 for everything the
    /// caller can fix by changing the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            AdamantError::RankZero
            | AdamantError::Degenerate(_)
            | AdamantError::Unidentifiable { .. }
            | AdamantError::BandResolution { .. }
            | AdamantError::DegenerateChannel { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AdamantError::Io {
            path: path.into(),
            source,
        }
    }
}
