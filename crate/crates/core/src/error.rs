use crate::machine::Frame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid machine parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("frame mismatch: expected {expected:?}, found {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("operation requires a non-salient machine (L2 = 0), got L2 = {0}")]
    RequiresNonSalient(f64),

    #[error("observability vector is zero; its phase is undefined")]
    ZeroObservabilityVector,

    #[error("position is indeterminate: back-EMF vector is zero")]
    IndeterminatePosition,

    #[error("back-EMF model is singular at zero speed")]
    ZeroSpeedSingularity,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("position-dependent output slope is zero; position is unobservable at standstill")]
    DegenerateOutputSlope,

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("Lie derivative order {0} exceeds the supported maximum of 3")]
    UnsupportedOrder(usize),

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax { line: usize, column: usize, message: String },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("numerical abort at t = {time} s: {reason}")]
    NumericalAbort { time: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
