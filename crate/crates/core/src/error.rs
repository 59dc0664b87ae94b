use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    /// Shot boundaries that do not tile their video.
    #[error("{video}: {message}")]
    Tiling { video: String, message: String },

    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch in {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("unknown shot id {shot_id} in {video}")]
    UnknownShot { video: String, shot_id: usize },

    /// A backend that needs weights or an external extractor which are not present.
    #[error("embedding backend `{backend}` unavailable: {reason}")]
    BackendUnavailable { backend: String, reason: String },

    /// An external program (e.g. ffmpeg) could not be started.
    #[error("external tool `{tool}` not available: {reason}")]
    ToolMissing { tool: String, reason: String },

    #[error("external tool `{tool}` failed: {message}")]
    ToolFailed { tool: String, message: String },

    #[error("non-finite loss at epoch {epoch}, video {video_id}")]
    NonFiniteLoss { epoch: usize, video_id: String },

    #[error("config fingerprint mismatch: checkpoint {checkpoint}, current {current}")]
    FingerprintMismatch { checkpoint: String, current: String },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// True when the failure is caused by something missing from the host
    /// (toolchain, weights) rather than by bad input.
    pub fn is_missing_dependency(&self) -> bool {
        matches!(
            self,
            Error::ToolMissing { .. } | Error::BackendUnavailable { .. }
        )
    }
}
