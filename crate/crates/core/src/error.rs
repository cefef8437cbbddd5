use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("phase-shift matching failed at k = {k}: {reason}")]
    Matching { k: f64, reason: String },

    #[error("near-singular Lippmann-Schwinger system at lambda = {lambda} (condition estimate {condition:e})")]
    Singular { lambda: f64, condition: f64 },

    #[error("unitarity violated at lambda = {lambda}: |s| - 1 = {defect:e}")]
    Unitarity { lambda: f64, defect: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("boundary: {0}")]
    Boundary(String),

    #[error("phase branch unresolved: {0}")]
    Branch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<LabError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn context(self, context: impl Into<String>) -> Self {
        LabError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
