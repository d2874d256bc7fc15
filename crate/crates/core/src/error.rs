use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("Krylov step did not reach tolerance {target:e} (achieved {achieved:e})")]
    KrylovBreakdown { target: f64, achieved: f64 },
    #[error("band touching: minimum gap {0:e} on the grid")]
    Gapless(f64),
    #[error("cutoff leakage {leak:e} exceeds {tol:e} at t = {t}")]
    Leakage { leak: f64, tol: f64, t: f64 },
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("no root in bracket [{0}, {1}]")]
    NoRoot(f64, f64),
    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. }
        )
    }
}
