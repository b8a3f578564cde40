use thiserror::Error;

use crate::sdp::SolveStatus;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigendecomposition of a {dim}x{dim} matrix did not converge within {max_iter} sweeps")]
    EigenConvergence { dim: usize, max_iter: usize },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    /// The max-relative entropy of the Choi pair is infinite, so the
    /// channel divergence is `+inf`.
    #[error("divergence is infinite: the support of the first Choi matrix is not contained in the support of the second")]
    InfiniteDivergence,

    #[error("energy constraint is infeasible: smallest eigenvalue {min_energy} exceeds the bound {bound}")]
    InfeasibleEnergy { min_energy: f64, bound: f64 },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver finished with status {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
