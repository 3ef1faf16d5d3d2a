use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every operation in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("point {point:?} lies outside the collar (phi = {phi})")]
    OutOfCollar { point: Vec<f64>, phi: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("shift margin exceeded: {0}")]
    Margin(String),

    #[error("unsupported shift: {0}")]
    UnsupportedShift(String),

    #[error("test function support [{lo}, {hi}] not contained in [{t0}, {t1}]")]
    Support { lo: f64, hi: f64, t0: f64, t1: f64 },

    #[error("non-positive density sample {value} at index {index}")]
    Positivity { index: usize, value: f64 },

    #[error("pressure solve did not converge after {iterations} iterations (residual {residual:e})")]
    PressureSolve { iterations: usize, residual: f64 },

    #[error("time step {dt} violates CFL bound {limit}")]
    StepSize { dt: f64, limit: f64 },

    #[error("smoothness lost at t = {time}: max|grad u| * dt = {indicator}")]
    SmoothnessLost { time: f64, indicator: f64 },

    #[error("cancellation identity violated at t = {time}: |A3 + B2| = {residual:e} (A3 = {a3:e}, B2 = {b2:e})")]
    Cancellation { time: f64, residual: f64, a3: f64, b2: f64 },

    #[error("input error: {0}")]
    Input(String),

    #[error("domain kind error: {0}")]
    DomainKind(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
