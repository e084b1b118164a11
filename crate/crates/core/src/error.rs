use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("eye position lies on the vertical axis through the camera")]
    DegenerateEyePosition,
    #[error("target and eye positions coincide")]
    CoincidentTargetAndEye,
    #[error("body ray does not meet the ground plane")]
    RayAboveHorizon,
    #[error("detection carries neither a feet nor a hip ray")]
    NoBodyRay,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need at least 3 subjects to split, got {0}")]
    TooFewSubjects(usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("model has dropout disabled")]
    DropoutDisabled,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("prediction has no uncertainty estimate")]
    MissingSigma,
    #[error("iteration did not converge")]
    NoConvergence,
    #[error("degenerate attention plane or grid")]
    DegeneratePlane,
    #[error("I/O failure on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch { expected: expected.to_string(), got: got.to_string() }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::TooFewSubjects(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
