//! Sparse storage, assembly helpers and direct solvers.
//!
//! Factorizations are delegated to `faer` (sequential sparse Cholesky and
//! pivoted LU); everything else here is local.

mod solve;
mod sparse;

pub use solve::{
    conservative_increment, saddle_matrix, solve_direct, BlockSystem, DirectSolver, SaddleSolver,
    RESIDUAL_TOL,
};
pub use sparse::{triple_product, CsrMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("singular system (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("solution residual {residual:e} exceeds bound {bound:e}")]
    Inaccurate { residual: f64, bound: f64 },
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
    #[error("factorization backend error: {0}")]
    Backend(String),
}
