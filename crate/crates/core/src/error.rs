use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index out of range: {index} >= {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular detuning: the dispersive models need |omega_c - omega_q| > 0")]
    SingularDetuning,

    #[error("unknown device preset `{0}`")]
    UnknownPreset(String),

    #[error("root scan exhausted: {0}")]
    RootScan(String),

    #[error("step size underflow at t = {time:e} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("degenerate steady state: the Liouvillian null space is not one-dimensional ({0})")]
    DegenerateNullSpace(String),

    #[error("steady-state solve did not converge: residual {residual:e}")]
    NonConvergence { residual: f64 },

    #[error("pole in Pochhammer denominator at parameter {0}")]
    PochhammerPole(String),

    #[error("series did not converge after {0} terms")]
    SeriesNonConvergence(usize),

    #[error("step size too large: dt * max_rate = {0:.3} exceeds 0.1")]
    StepTooLarge(f64),

    #[error("norm drift {drift:e} at step {step} exceeds {limit:e}")]
    NormDrift { drift: f64, step: usize, limit: f64 },

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
