use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error kinds mirror the failure modes of the public operations: domain and
/// parameter violations, window/grid geometry problems, estimator resolution
/// failures, and pipeline-level reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Param(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("splice error: {0}")]
    Splice(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("constants error: {0}")]
    Constants(String),

    #[error("not shadowable at this defect: {0}")]
    NotShadowable(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
