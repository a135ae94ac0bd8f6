use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular configuration: <{root}, phi> = {pairing} lies on a cot singularity")]
    SingularConfiguration { root: String, pairing: f64 },

    #[error("step did not converge at t = {time} after {halvings} halvings")]
    NonConvergence { time: f64, halvings: u32 },

    #[error("degree {degree} out of range (max {max})")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("series truncation: tail estimate {tail:e} exceeds tolerance {tolerance:e}")]
    Truncation { tail: f64, tolerance: f64 },

    #[error("collision: components {i} and {j} coincide")]
    Collision { i: usize, j: usize },

    #[error("point too close to the boundary for a finite-difference step of {step}")]
    Margin { step: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("path {index}: {source}")]
    Path {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::SingularConfiguration { .. }
            | Error::Truncation { .. }
            | Error::Collision { .. } => true,
            Error::Path { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
