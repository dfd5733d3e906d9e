use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("area function is not positive: A({x}) = {value}")]
    NonPositiveArea { x: f64, value: f64 },

    #[error("area function is not periodic on the circle base (mismatch {mismatch:.3e} in derivative order {order})")]
    NonPeriodicArea { order: usize, mismatch: f64 },

    #[error("point x = {x} outside the base domain [0, 1]")]
    OutsideBase { x: f64 },

    #[error("boundary transversality violated: <n, nu> = 0 at x = {x}")]
    Transversality { x: f64 },

    #[error("fiber Neumann compatibility violated at x = {x}: residual {residual:.3e}")]
    NeumannCompatibility { x: f64, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-positive density {value:.3e} at t = {t:.6}, cell ({i}, {j})")]
    NegativeDensity { t: f64, i: usize, j: usize, value: f64 },

    #[error("non-finite value in field '{field}' at t = {t:.6}, cell ({i}, {j})")]
    NonFinite { t: f64, i: usize, j: usize, field: &'static str },

    #[error("limit solution left the classical regime at t = {t:.6}: {reason}")]
    ClassicalHypothesis { t: f64, reason: String },

    #[error("coercivity scan found a violated inequality: {0}")]
    CoercivityViolation(String),

    #[error("flow left the base domain at t = {t:.6} (x = {x:.6})")]
    FlowExitsDomain { t: f64, x: f64 },

    #[error("eigeniteration did not converge after {iters} iterations (last quotient {last:.6e})")]
    EigenNonConvergence { iters: usize, last: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
