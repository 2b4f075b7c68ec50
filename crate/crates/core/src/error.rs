use std::path::PathBuf;

use promptfuse_autodiff::AutodiffError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error("invalid model config: {0}")]
    ModelConfig(String),

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("sequence of length {len} exceeds the maximum length {max}")]
    LengthOverflow { len: usize, max: usize },

    #[error("width mismatch: expected {expected}, got {actual} ({context})")]
    WidthMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("BlindPrompt requires at least one prompt vector")]
    BlindPromptWithoutPrompts,

    #[error("method {method} does not support {what}")]
    UnsupportedMethod { method: String, what: &'static str },

    #[error("image must be {expected_h}x{expected_w}x3, got {h}x{w}x{c}")]
    ImageShape {
        expected_h: usize,
        expected_w: usize,
        h: usize,
        w: usize,
        c: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("feature file: bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("file truncated: {0}")]
    Truncated(String),

    #[error(
        "checkpoint fingerprint {found:016x} does not match config fingerprint {expected:016x}"
    )]
    FingerprintMismatch { found: u64, expected: u64 },

    #[error("checkpoint is missing tensor {0:?}")]
    MissingTensor(String),

    #[error("unnamed or unknown parameter {0:?}")]
    UnknownParameter(String),

    #[error("duplicate parameter name {0:?}")]
    DuplicateParameter(String),

    #[error("infeasible scene spec: {0}")]
    InfeasibleScene(String),

    #[error("cannot sample {k} shots from a dataset of {size}")]
    InfeasibleShots { k: usize, size: usize },

    #[error("non-finite gradient for parameter {0:?}")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}, step {step} (loss {loss})")]
    Diverged {
        epoch: usize,
        step: usize,
        loss: f32,
    },

    #[error("integrated gradients: non-finite gradient at interpolation step {k}")]
    NonFiniteAttribution { k: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Autodiff(_) => "autodiff",
            Error::ModelConfig(_) | Error::Config(_) => "config",
            Error::UnknownToken(_) => "vocab",
            Error::LengthOverflow { .. } => "length-overflow",
            Error::WidthMismatch { .. } => "width-mismatch",
            Error::BlindPromptWithoutPrompts | Error::UnsupportedMethod { .. } => "method",
            Error::ImageShape { .. } | Error::EmptyInput(_) => "input",
            Error::BadMagic(_) => "bad-magic",
            Error::VersionMismatch { .. } => "version",
            Error::Truncated(_) => "truncated",
            Error::FingerprintMismatch { .. } => "fingerprint",
            Error::MissingTensor(_) | Error::UnknownParameter(_) | Error::DuplicateParameter(_) => {
                "parameter"
            }
            Error::InfeasibleScene(_) => "infeasible-scene",
            Error::InfeasibleShots { .. } => "infeasible-shots",
            Error::NonFiniteGradient(_)
            | Error::Diverged { .. }
            | Error::NonFiniteAttribution { .. } => "divergence",
            Error::MissingCheckpoint(_) => "missing-checkpoint",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
