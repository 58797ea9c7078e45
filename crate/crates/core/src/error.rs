use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: {dim} mismatch: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        dim: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: {dim} extent {extent} is odd; 2x2 pooling needs even extents")]
    OddExtent {
        op: &'static str,
        dim: &'static str,
        extent: usize,
    },

    #[error("input extent {extent} along {dim} is not divisible by {divisor}")]
    Indivisible {
        dim: &'static str,
        extent: usize,
        divisor: usize,
    },

    #[error("non-finite value produced by `{op}`")]
    NonFinite { op: &'static str },

    #[error("loss must be a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("gradient for parameter `{name}` was never populated")]
    MissingGradient { name: String },

    #[error("builder is not deterministic: two forward passes gave {first} and {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Format(#[from] FormatError),

    #[error("data error: {0}")]
    Data(String),

    #[error("{} file(s) failed to ingest:\n{}", .0.len(), format_file_errors(.0))]
    Ingest(Vec<(PathBuf, String)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures decoding the binary container used by checkpoints and patch sets.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated payload: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("spec/weight mismatch: {0}")]
    SpecMismatch(String),
    #[error("{0} trailing bytes after payload")]
    TrailingData(usize),
}

impl FormatError {
    /// Stable numeric code per failure class.
    pub fn code(&self) -> u8 {
        match self {
            FormatError::CorruptHeader(_) => 1,
            FormatError::Version { .. } => 2,
            FormatError::Truncated { .. } => 3,
            FormatError::SpecMismatch(_) => 4,
            FormatError::TrailingData(_) => 5,
        }
    }
}

fn format_file_errors(errors: &[(PathBuf, String)]) -> String {
    errors
        .iter()
        .map(|(p, e)| format!("  {}: {e}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
