use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {subdivisions} subdivisions")]
    QuadratureNotConverged { value: f64, error: f64, subdivisions: usize },
    #[error("pole encountered: {0}")]
    Pole(String),
    #[error("extrapolation did not stabilize: {0}")]
    Extrapolation(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
