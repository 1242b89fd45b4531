use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {dimension}: expected {expected}, got {actual}")]
    ShapeMismatch {
        dimension: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("input too short: length {length} is below the minimum admissible length {min_length}")]
    InputTooShort { length: usize, min_length: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("batch norm layer `{0}` has no running statistics; run at least one train-mode pass first")]
    UninitializedRunningStats(String),

    #[error("unknown layer `{name}`; valid taps: {}", .valid.join(", "))]
    UnknownLayer { name: String, valid: Vec<String> },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("wav decode failed ({field}): {message}")]
    Wav { field: &'static str, message: String },

    #[error("bad checkpoint magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    BadCrc { stored: u32, computed: u32 },

    #[error("truncated or malformed file: {0}")]
    Malformed(String),

    #[error(
        "distribution block {block} of clip `{clip}` at timestep {timestep} sums to {sum} (allowed deviation 1e-3)"
    )]
    NotNormalized {
        clip: String,
        timestep: usize,
        block: &'static str,
        sum: f64,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("svm: {0}")]
    Svm(String),

    #[error("training: {0}")]
    Training(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
