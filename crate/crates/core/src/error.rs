use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("singular matrix: pivot {pivot:e} in column {column} (scale {scale:e})")]
    Singular { column: usize, pivot: f64, scale: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("bilinear form is not coercive on the interior space (beta = {beta:e})")]
    NotCoercive { beta: f64 },

    #[error("spectrum has a negative eigenvalue {value:e}")]
    NegativeSpectrum { value: f64 },

    #[error("{what} {value:e} exceeds the tolerance {tol:e}")]
    ToleranceExceeded { what: String, value: f64, tol: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures (singularity, non-convergence, loss of coercivity)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NoConvergence { .. }
                | Error::NotCoercive { .. }
                | Error::NegativeSpectrum { .. }
                | Error::ToleranceExceeded { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
