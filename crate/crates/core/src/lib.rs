//! Solvers for singularly perturbed convection-diffusion equations
//! discretized by upwind finite differences on Shishkin meshes.
//!
//! The crate provides:
//! - piecewise-uniform (Shishkin) mesh construction in 1D and 2D,
//!   together with the layer/interior region partitions the meshes induce
//!   ([`mesh`]);
//! - the benchmark problems and manufactured solutions ([`problem`]);
//! - upwind (and, for comparison, central) finite-difference assembly
//!   ([`discretize`]);
//! - tridiagonal, dense, and sparse linear-algebra kernels ([`linalg`]);
//! - the 1D boundary-layer block preconditioner and its spectral
//!   verification ([`precond1d`]);
//! - the 2D block upper-triangular preconditioner with line solves on the
//!   edge-layer regions ([`precond2d`]) and geometric multigrid in the
//!   corner region ([`mgcorner`]);
//! - unrestarted GMRES/FGMRES with discretization-error-matched stopping
//!   rules ([`krylov`]).

pub mod discretize;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod mgcorner;
pub mod precond1d;
pub mod precond2d;
pub mod problem;

pub use discretize::{CsrMatrix, TridiagonalMatrix};
pub use error::Error;
pub use krylov::{SolveStats, StoppingRule};
pub use mesh::{LayerCase, Mesh1D, Mesh2D, RegionPartition};
pub use precond1d::Preconditioner1D;
pub use precond2d::BlockPreconditioner2D;
pub use problem::{ManufacturedCase, Problem1D, Problem2D};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
