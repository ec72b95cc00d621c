//! Shared setup helpers for the criterion benchmarks.

use blprec::discretize::{assemble_upwind_1d, assemble_upwind_2d, CsrMatrix, TridiagonalMatrix};
use blprec::mesh::{build_shishkin_1d, build_shishkin_2d, partition_1d, partition_regions};
use blprec::precond1d::{build_preconditioner_1d, Preconditioner1D};
use blprec::precond2d::{build_preconditioner_2d, BlockPreconditioner2D};
use blprec::problem::{example_1d, exponential_case, parabolic_case};
use blprec::{LayerCase, RegionPartition};

/// Assembled 1D benchmark system with its block preconditioner.
pub fn setup_1d(eps: f64, n: usize) -> (TridiagonalMatrix, Vec<f64>, Preconditioner1D) {
    let mesh = build_shishkin_1d(eps, n, 0.99).expect("valid 1d mesh");
    let problem = example_1d(eps);
    let (a, b) = assemble_upwind_1d(&mesh, &problem, eps);
    let (n_layer, _) = partition_1d(&mesh);
    let m = build_preconditioner_1d(&a, n_layer).expect("valid 1d preconditioner");
    (a, b, m)
}

/// Assembled 2D system (parabolic or exponential layers) with its
/// block preconditioner, in region-block ordering.
pub fn setup_2d(
    case: LayerCase,
    eps: f64,
    n: usize,
) -> (CsrMatrix, Vec<f64>, BlockPreconditioner2D, RegionPartition) {
    let (problem, c1_lower, c2_lower) = match case {
        LayerCase::ParabolicExponential => (parabolic_case(eps).problem, 0.99, None),
        LayerCase::TwoExponential => (exponential_case(eps).problem, 1.99, Some(2.99)),
    };
    let mesh = build_shishkin_2d(eps, n, case, c1_lower, c2_lower, 2.5).expect("valid 2d mesh");
    let part = partition_regions(&mesh);
    let (a, b) = assemble_upwind_2d(&mesh, &problem, eps, &part).expect("valid 2d system");
    let m = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, false)
        .expect("valid 2d preconditioner");
    (a, b, m, part)
}
