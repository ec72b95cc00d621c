//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization failed: zero or non-finite pivot at index {index}")]
    Factorization { index: usize },

    #[error("matrix is singular to machine precision at column {index}")]
    Singular { index: usize },

    #[error("degenerate stencil: collapsed center {center} is not positive at node ({i}, {j})")]
    DegenerateStencil { i: usize, j: usize, center: f64 },

    #[error("structural error in preconditioner setup: {0}")]
    Structure(String),

    #[error(
        "iteration did not converge within {max_iters} iterations (last residual {residual:.3e})"
    )]
    NonConvergence { max_iters: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
