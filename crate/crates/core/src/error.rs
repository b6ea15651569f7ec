use thiserror::Error;

/// Errors raised across the library.
///
/// The variants map onto distinct failure classes so that front ends can
/// report them with different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point:?} lies outside the domain [{lo:?}, {hi:?}]")]
    OutsideDomain { point: Vec<f64>, lo: Vec<f64>, hi: Vec<f64> },

    #[error("kernel is singular at coincident points {0:?}")]
    Singular(Vec<f64>),

    #[error("medium violates coefficient bounds: {0}")]
    Admissibility(String),

    #[error("numerical range exceeded: {0}")]
    Range(String),

    #[error("resolution too coarse: {given} points per dimension, at least {required} required")]
    Resolution { required: usize, given: usize },

    #[error("iteration did not converge after {iterations} iterations (last relative residual {last_residual:e})")]
    NoConvergence { iterations: usize, last_residual: f64, history: Vec<f64> },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
