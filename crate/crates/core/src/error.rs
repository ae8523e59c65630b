use thiserror::Error;

use crate::geo::Crs;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("CRS mismatch: {0} vs {1}")]
    CrsMismatch(Crs, Crs),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error(transparent)]
    Las(#[from] LasError),

    /// Binary or header-level parse failure in a raster, PPM or sidecar file.
    #[error("{format} parse error at byte offset {offset}: {message}")]
    Format {
        format: &'static str,
        offset: usize,
        message: String,
    },

    /// Parse failure in a line-oriented text format.
    #[error("{format} parse error at line {line}: {message}")]
    Line {
        format: &'static str,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Failure inside a named pipeline stage.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the caller's data or arguments rather than
    /// by the environment.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io(e) => matches!(
                e.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData
            ),
            Error::Stage { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}

/// LAS decoding failures. Every variant names the byte offset at which the
/// problem was detected.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LasError {
    #[error("bad LAS magic at offset {offset}")]
    BadMagic { offset: usize },

    #[error("unsupported LAS version {major}.{minor} at offset {offset}")]
    UnsupportedVersion { offset: usize, major: u8, minor: u8 },

    #[error("unsupported point data format {format} at offset {offset}")]
    UnsupportedFormat { offset: usize, format: u8 },

    #[error("malformed LAS header at offset {offset}: {message}")]
    BadHeader { offset: usize, message: String },

    #[error("truncated point record at offset {offset}")]
    Truncated { offset: usize },

    #[error("point count mismatch at offset {offset}: header says {declared}, data holds {found}")]
    PointCountMismatch {
        offset: usize,
        declared: u64,
        found: u64,
    },
}

impl LasError {
    pub fn offset(&self) -> usize {
        match self {
            LasError::BadMagic { offset }
            | LasError::UnsupportedVersion { offset, .. }
            | LasError::UnsupportedFormat { offset, .. }
            | LasError::BadHeader { offset, .. }
            | LasError::Truncated { offset }
            | LasError::PointCountMismatch { offset, .. } => *offset,
        }
    }
}
