use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} nodal values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field is not in V: u(0) = {0:e} (must vanish at x = 0)")]
    NotInV(f64),

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time interval ({start}, {end}] lies outside the sampled range [{lo}, {hi}]")]
    IntervalOutOfRange { start: f64, end: f64, lo: f64, hi: f64 },

    #[error("Newton did not converge at step {step} after {iterations} iterations (last residual {residual:e})")]
    NewtonFailed { step: usize, iterations: usize, residual: f64 },

    #[error("step {step} increased the step objective by {increase:e}")]
    ObjectiveIncrease { step: usize, increase: f64 },

    #[error("solution left the certified range |s| <= {bound} at step {step} (max |u| = {value})")]
    RangeExceeded { step: usize, value: f64, bound: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (last relative residual {last:e}); try a smaller relaxation or time step")]
    PicardNotConverged { iterations: usize, last: f64, history: Vec<f64> },

    #[error("dissipativity estimate requires beta < L^-3 = {threshold}, got beta = {beta} (C_beta <= 0)")]
    BetaAboveThreshold { beta: f64, threshold: f64 },

    #[error("singular banded system (zero pivot in column {0})")]
    Singular(usize),

    #[error("member run failed ({label}): {source}")]
    Member {
        label: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn member(label: impl Into<String>, source: Error) -> Self {
        Error::Member { label: label.into(), source: Box::new(source) }
    }
}
