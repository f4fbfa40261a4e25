use thiserror::Error;

use crate::fields::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("singular metric: |det g| = {det:e}")]
    SingularMetric { det: f64 },
    #[error("degenerate Omega: |Omega| = {omega:e}")]
    DegenerateOmega { omega: f64 },
    #[error("vanishing W_v: |dW/dv| = {value:e}")]
    ZeroWv { value: f64 },
    #[error("momentum covector vanishes")]
    ZeroMomentum,
    #[error("gauge tensor not symmetric: T^{k}_{i}{j} differs from T^{k}_{j}{i} by {diff:e}")]
    AsymmetricGauge { k: usize, i: usize, j: usize, diff: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("tangent vectors are rank deficient at y = {y:?}")]
    RankDeficientTangents { y: Vec<f64> },
    #[error("nu vanished ({nu:e}) during Pfaff integration")]
    NuVanished { nu: f64 },
    #[error("sampler produced no points")]
    EmptySampler,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Config(_) | Error::Io(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
