use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite integrand value at node {index} ({chart}-chart coordinate {re} + {im}i)")]
    NonFinite {
        index: usize,
        chart: &'static str,
        re: f64,
        im: f64,
    },

    #[error("unknown weight family `{0}`")]
    UnknownWeight(String),

    #[error("growth condition violated at |z| = {radius}: psi = {value} exceeds bound {bound}")]
    GrowthViolation { radius: f64, value: f64, bound: f64 },

    #[error("Gram matrix is not positive definite after {attempts} jitter attempts (quadrature under-resolved?)")]
    CholeskyFailed { attempts: usize },

    #[error("weight is not radial")]
    NotRadial,

    #[error("zero section has no divisor")]
    ZeroSection,

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("dictionary mismatch: {0}")]
    DictionaryMismatch(String),

    #[error("cache file is invalid: {0}")]
    BadCache(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
