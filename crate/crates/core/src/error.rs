use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the clustering pipeline.
#[derive(Debug, Error)]
pub enum GlrrError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("columns are not orthonormal: residual {residual:e} exceeds tolerance {tol:e}")]
    NotOrthonormal { residual: f64, tol: f64 },

    #[error("sample matrix is rank deficient: {rank} significant singular values, need {needed}")]
    RankDeficient { rank: usize, needed: usize },

    #[error("log map undefined: smallest singular value of XᵀY is {min_singular:e}")]
    LogUndefined { min_singular: f64 },

    #[error("log map undefined between points {base} and {target}: smallest singular value of XᵀY is {min_singular:e}")]
    LogUndefinedPair {
        base: usize,
        target: usize,
        min_singular: f64,
    },

    #[error("tangent vectors live at different base points")]
    BaseMismatch,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("affinity matrix is identically zero")]
    DegenerateAffinity,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("no label found for group `{0}`")]
    MissingLabels(String),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GlrrError>,
    },
}

pub type Result<T> = std::result::Result<T, GlrrError>;

impl GlrrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GlrrError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        GlrrError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            GlrrError::Stage { source, .. } => source.exit_code(),
            GlrrError::Io { .. } => 4,
            GlrrError::LogUndefined { .. }
            | GlrrError::LogUndefinedPair { .. }
            | GlrrError::NumericalFailure(_)
            | GlrrError::RankDeficient { .. }
            | GlrrError::DegenerateAffinity => 3,
            _ => 2,
        }
    }
}
