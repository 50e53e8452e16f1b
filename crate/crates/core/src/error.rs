use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing archive file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("schema error in {}:{line}: {message}", file.display())]
    Schema {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("authorization rejected by {url} (HTTP {status})")]
    Auth { url: String, status: u16 },

    #[error("rate limited by {url}; retry after {retry_after_secs:?} s")]
    RateLimited {
        url: String,
        retry_after_secs: Option<u64>,
    },

    #[error("pagination aborted at {url}: {reason}")]
    PartialData { url: String, reason: String },

    #[error("bus factor threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),

    #[error("feature rows disagree on metric columns: {0}")]
    ColumnMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {0} has no lifecycle label")]
    UnlabeledRow(String),

    #[error("class {class} has {size} rows; need at least {needed}")]
    ClassTooSmall {
        class: String,
        size: usize,
        needed: usize,
    },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(String),

    #[error("SMO did not converge on subproblem {subproblem} within {iterations} iterations")]
    NonConvergence { subproblem: usize, iterations: usize },

    #[error("invalid fold count: {0}")]
    InvalidFolds(String),

    #[error("grid is empty")]
    EmptyGrid,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("label {0} is not among the declared labels")]
    UnknownLabel(usize),

    #[error("confusion matrix has no entries")]
    EmptyMatrix,

    #[error("sample size {0} outside the supported range 3..=5000")]
    SampleSizeOutOfRange(usize),

    #[error("column {0} is constant")]
    ConstantColumn(usize),

    #[error("covariance matrix of class {0} is singular")]
    SingularCovariance(String),

    #[error("feature table lacks column `{0}` required by the model")]
    MissingFeatureColumn(String),

    #[error("model format version {found} is newer than supported version {supported}")]
    UnsupportedFormatVersion { found: u32, supported: u32 },

    #[error("unknown lifecycle label `{0}`")]
    UnknownStage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("cross-validation repeat {repeat} fold {fold}: {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("http error: {0}")]
    Http(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error once stage and fold annotations are peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Fold { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for bad input data or configuration, as opposed to runtime
    /// failures (network, I/O, numerical non-convergence).
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self.root(),
            Error::Io { .. }
                | Error::Http(_)
                | Error::Auth { .. }
                | Error::RateLimited { .. }
                | Error::PartialData { .. }
                | Error::NonConvergence { .. }
        )
    }
}
