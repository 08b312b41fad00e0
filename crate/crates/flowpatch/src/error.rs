use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by raster construction, file I/O, and the solver stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("count mismatch: {frames} frames vs {masks} masks")]
    CountMismatch { frames: usize, masks: usize },

    #[error("geometry mismatch: {context} ({expected_w}x{expected_h} vs {got_w}x{got_h})")]
    GeometryMismatch {
        context: String,
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("wrong magic in {path}: not a .flo file")]
    WrongMagic { path: PathBuf },

    #[error("truncated .flo payload in {path}: expected {expected} bytes, got {got}")]
    TruncatedFlow {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("frame index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsolvable fill: hole covers the entire raster, no boundary data")]
    UnsolvableFill,

    #[error("empty region: metric region contains no pixels")]
    EmptyRegion,

    #[error("raster {w}x{h} too small: {context}")]
    RasterTooSmall { w: usize, h: usize, context: String },

    #[error("missing external flow file {path}")]
    MissingFlow { path: PathBuf },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn geometry(
        context: impl Into<String>,
        expected: (usize, usize),
        got: (usize, usize),
    ) -> Self {
        Error::GeometryMismatch {
            context: context.into(),
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        }
    }
}
