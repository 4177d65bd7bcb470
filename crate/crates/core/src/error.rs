use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Fourier index {k:?} is outside the window of a side-{n} torus")]
    IndexOutOfRange { k: Vec<i64>, n: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid environment law: {0}")]
    InvalidLaw(String),

    #[error("conductance {value} on edge {edge} violates ellipticity bounds [{lower}, {upper}]")]
    Ellipticity {
        edge: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("right-hand side is not mean-zero (mean {mean:e}, scale {scale:e})")]
    NotMeanZero { mean: f64, scale: f64 },

    #[error(
        "solver did not reach tolerance {:e} within {} iterations (residual {:e})",
        .0.tolerance, .0.iterations, .0.relative_residual
    )]
    NotConverged(SolveReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("check failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged(_) => 3,
            Error::Assertion(_) => 4,
            _ => 2,
        }
    }
}
