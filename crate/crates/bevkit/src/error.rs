//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot project a zero-length vector")]
    ZeroNorm,

    #[error("distortion inversion did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u32, residual: f64 },

    #[error("pixel maps outside the projectable region of the camera")]
    OutsideProjectable,

    #[error("depth list must be non-empty, positive and strictly increasing")]
    BadDepths,

    #[error("stride must be at least 1")]
    BadStride,

    #[error("feature grid is {got_u}x{got_v}x{got_c}, expected {want_u}x{want_v} pixels")]
    FeatureShapeMismatch {
        got_u: usize,
        got_v: usize,
        got_c: usize,
        want_u: usize,
        want_v: usize,
    },

    #[error("feature vectors must all share one length")]
    RaggedFeatures,

    #[error("z slab has zero height (z_min == z_max)")]
    ZeroZSlab,

    #[error("operation requires a polar grid")]
    NotPolar,

    #[error("invalid grid: {0}")]
    BadGrid(String),

    #[error("source label `{0}` has no entry in the class mapping table")]
    UnmappedLabel(String),

    #[error("dangling token reference `{token}` in table `{table}`")]
    DanglingToken { table: String, token: String },

    #[error("evaluation strata overlap: {0}")]
    OverlappingStrata(String),

    #[error("unresolvable sample tokens in detections: {0}")]
    UnknownSampleTokens(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    IoAt {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Attach the offending path to an I/O error.
    pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::IoAt {
            path: path.display().to_string(),
            source,
        }
    }
}
