use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: field `{field}`: {message}")]
    Field {
        origin: String,
        field: String,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown scenario `{name}` (valid presets: {valid})")]
    UnknownPreset { name: String, valid: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Failures inside the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("non-finite {field} at step {step}, RK4 stage {stage}")]
    NonFiniteState {
        step: usize,
        stage: usize,
        field: &'static str,
    },
    #[error("non-finite control parameter {which}[{index}]")]
    NonFiniteControl { which: &'static str, index: usize },
    #[error("non-finite gradient component {which}[{index}]")]
    NonFiniteGradient { which: &'static str, index: usize },
    #[error("non-finite loss at optimizer step {step}")]
    NonFiniteLoss { step: usize },
    #[error("non-finite training loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("non-finite Adam update for parameter {index}")]
    NonFiniteUpdate { index: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
