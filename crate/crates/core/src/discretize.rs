//! Finite-difference assembly on Shishkin meshes: the upwind and central
//! 1D operators, the 5-point upwind 2D operator under region-block
//! ordering, and the row rescaling used before Galerkin coarsening.
//!
//! Note on the central scheme: the M-matrix sign pattern of the central
//! stencil requires eps >= c_i h_i / 2 (the sub-diagonal entry
//! -eps/(h_i hbar_i) + c_i/(2 hbar_i) turns positive exactly when
//! eps < c_i h_i / 2).  The scheme is assembled here only to demonstrate
//! that failure; production assembly is upwind.

use crate::error::Error;
use crate::mesh::{Mesh1D, Mesh2D, RegionPartition};
use crate::problem::{Problem1D, Problem2D};
use crate::Result;
use std::io::Write;

/// Tridiagonal matrix: `sub` and `sup` have length n-1, `diag` length n.
#[derive(Debug, Clone)]
pub struct TridiagonalMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.n();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = Vec::with_capacity(3);
            if i > 0 {
                r.push((i - 1, self.sub[i - 1]));
            }
            r.push((i, self.diag[i]));
            if i + 1 < n {
                r.push((i + 1, self.sup[i]));
            }
            rows.push(r);
        }
        CsrMatrix::from_rows(n, n, &rows)
    }
}

/// Compressed-sparse-row matrix with strictly increasing column indices
/// within each row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(nrows: usize, ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut entries: Vec<(usize, f64)> = row.clone();
            entries.sort_unstable_by_key(|&(c, _)| c);
            for w in entries.windows(2) {
                assert!(w[0].0 < w[1].0, "duplicate column index in row");
            }
            for (c, v) in entries {
                assert!(c < ncols);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, n, &(0..n).map(|i| vec![(i, 1.0)]).collect::<Vec<_>>())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Iterator over the (column, value) entries of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(0.0, |(_, v)| v)
    }

    /// Sub-block with the given row and column index lists (values gathered
    /// by position in the lists).
    pub fn sub_block(&self, row_ids: &[usize], col_ids: &[usize]) -> CsrMatrix {
        let mut col_pos = vec![usize::MAX; self.ncols];
        for (p, &c) in col_ids.iter().enumerate() {
            col_pos[c] = p;
        }
        let rows: Vec<Vec<(usize, f64)>> = row_ids
            .iter()
            .map(|&r| {
                self.row(r)
                    .filter_map(|(c, v)| {
                        let p = col_pos[c];
                        (p != usize::MAX).then_some((p, v))
                    })
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(row_ids.len(), col_ids.len(), &rows)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v));
            }
        }
        CsrMatrix::from_rows(self.ncols, self.nrows, &rows)
    }

    /// Sparse matrix product self * other.
    pub fn multiply(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.nrows);
        let mut acc = vec![0.0f64; other.ncols];
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            for (k, v) in self.row(r) {
                for (c, w) in other.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += v * w;
                }
            }
            touched.sort_unstable();
            let mut row = Vec::with_capacity(touched.len());
            for &c in &touched {
                if acc[c] != 0.0 {
                    row.push((c, acc[c]));
                }
                acc[c] = 0.0;
            }
            rows.push(row);
            touched.clear();
        }
        CsrMatrix::from_rows(self.nrows, other.ncols, &rows)
    }

    /// Matrix Market coordinate export, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Assemble the 1D upwind operator (order N-1) and right-hand side.
///
/// Row i carries the stencil
/// [-eps/(h_i hbar_i),
///  eps/hbar_i (1/h_i + 1/h_{i+1}) + c_i/h_{i+1} + r_i,
///  -eps/(h_{i+1} hbar_i) - c_i/h_{i+1}];
/// homogeneous Dirichlet values are eliminated.
pub fn assemble_upwind_1d(
    mesh: &Mesh1D,
    problem: &Problem1D,
    eps: f64,
) -> (TridiagonalMatrix, Vec<f64>) {
    let n = mesh.n() - 1;
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    for i in 1..=n {
        let x = mesh.points()[i];
        let (h, hn, hb) = (mesh.h(i), mesh.h(i + 1), mesh.h_bar(i));
        let (c, r) = (problem.c(x), problem.r(x));
        diag[i - 1] = eps / hb * (1.0 / h + 1.0 / hn) + c / hn + r;
        if i > 1 {
            sub[i - 2] = -eps / (h * hb);
        }
        if i < n {
            sup[i - 1] = -eps / (hn * hb) - c / hn;
        }
        rhs[i - 1] = problem.f(x);
    }
    (TridiagonalMatrix { sub, diag, sup }, rhs)
}

/// Assemble the 1D central-difference operator.  Not an M-matrix when
/// eps < c_i h_i / 2; provided to demonstrate that failure.
pub fn assemble_central_1d(mesh: &Mesh1D, problem: &Problem1D, eps: f64) -> TridiagonalMatrix {
    let n = mesh.n() - 1;
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    for i in 1..=n {
        let x = mesh.points()[i];
        let (h, hn, hb) = (mesh.h(i), mesh.h(i + 1), mesh.h_bar(i));
        let (c, r) = (problem.c(x), problem.r(x));
        diag[i - 1] = eps / hb * (1.0 / h + 1.0 / hn) + r;
        if i > 1 {
            sub[i - 2] = -eps / (h * hb) + c / (2.0 * hb);
        }
        if i < n {
            sup[i - 1] = -eps / (hn * hb) - c / (2.0 * hb);
        }
    }
    TridiagonalMatrix { sub, diag, sup }
}

/// The five stencil values at meshpoint (i, j): (west, south, center,
/// east, north).
pub fn stencil_2d(mesh: &Mesh2D, problem: &Problem2D, eps: f64, i: usize, j: usize) -> [f64; 5] {
    let x = mesh.x_mesh.points()[i];
    let y = mesh.y_mesh.points()[j];
    let (h, hn, hb) = (mesh.x_mesh.h(i), mesh.x_mesh.h(i + 1), mesh.x_mesh.h_bar(i));
    let (k, kn, kb) = (mesh.y_mesh.h(j), mesh.y_mesh.h(j + 1), mesh.y_mesh.h_bar(j));
    let c1 = problem.c1(x, y);
    let c2 = problem.c2(x, y);
    let r = problem.r(x, y);
    let west = -eps / (hb * h);
    let east = -eps / (hb * hn) - c1 / hn;
    let south = -eps / (kb * k);
    let north = -eps / (kb * kn) - c2 / kn;
    let center =
        eps / hb * (1.0 / h + 1.0 / hn) + eps / kb * (1.0 / k + 1.0 / kn) + c1 / hn + c2 / kn + r;
    [west, south, center, east, north]
}

/// Assemble the 2D upwind operator of order (N-1)^2 in region-block
/// order C, X, Y, I (lexicographic within each block), together with the
/// right-hand side.  Homogeneous Dirichlet boundary is eliminated.
pub fn assemble_upwind_2d(
    mesh: &Mesh2D,
    problem: &Problem2D,
    eps: f64,
    ordering: &RegionPartition,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let n = mesh.n();
    let total = (n - 1) * (n - 1);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(total);
    let mut rhs = vec![0.0; total];

    let mut nodes: Vec<(usize, usize)> = Vec::with_capacity(total);
    for list in [
        &ordering.corner,
        &ordering.edge_x,
        &ordering.edge_y,
        &ordering.interior,
    ] {
        nodes.extend_from_slice(list);
    }

    for (g, &(i, j)) in nodes.iter().enumerate() {
        let x = mesh.x_mesh.points()[i];
        let y = mesh.y_mesh.points()[j];
        if problem.c1(x, y) <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "c1 must be positive everywhere; c1({x}, {y}) <= 0"
            )));
        }
        if problem.c2(x, y) < 0.0 {
            return Err(Error::InvalidInput(format!(
                "c2 must be non-negative everywhere; c2({x}, {y}) < 0"
            )));
        }
        let [west, south, center, east, north] = stencil_2d(mesh, problem, eps, i, j);
        let mut row = Vec::with_capacity(5);
        if j > 1 {
            row.push((ordering.global_index(i, j - 1), south));
        }
        if i > 1 {
            row.push((ordering.global_index(i - 1, j), west));
        }
        row.push((g, center));
        if i < n - 1 {
            row.push((ordering.global_index(i + 1, j), east));
        }
        if j < n - 1 {
            row.push((ordering.global_index(i, j + 1), north));
        }
        rows.push(row);
        rhs[g] = problem.f(x, y);
    }
    Ok((CsrMatrix::from_rows(total, total, &rows), rhs))
}

/// Multiply the row of `block` belonging to node (i, j) by
/// hbar_i * kbar_j, turning the finite-difference scaling into a
/// finite-element-like one.  Returns the rescaled block together with the
/// per-row scaling vector, so incoming residuals can be rescaled
/// identically before multigrid cycles.
pub fn rescale_rows_fd_to_fe(
    block: &CsrMatrix,
    nodes: &[(usize, usize)],
    mesh: &Mesh2D,
) -> (CsrMatrix, Vec<f64>) {
    assert_eq!(block.nrows(), nodes.len());
    let scaling: Vec<f64> = nodes
        .iter()
        .map(|&(i, j)| mesh.x_mesh.h_bar(i) * mesh.y_mesh.h_bar(j))
        .collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..block.nrows())
        .map(|r| block.row(r).map(|(c, v)| (c, v * scaling[r])).collect())
        .collect();
    (
        CsrMatrix::from_rows(block.nrows(), block.ncols(), &rows),
        scaling,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csr_matvec;
    use crate::mesh::{build_shishkin_1d, build_shishkin_2d, partition_regions, LayerCase};
    use crate::problem::{example_1d, exponential_case, parabolic_case};

    fn uniform_mesh(n: usize) -> Mesh1D {
        build_shishkin_1d(1.0, n, 1.0).unwrap() // tau clamps at 1/2 -> uniform
    }

    fn const_problem_1d(c: f64, r: f64) -> Problem1D {
        crate::problem::test_support::constant_1d(c, r)
    }

    #[test]
    fn upwind_uniform_stencil_values() {
        // uniform mesh h = 1/N: row = [-eps N^2, 2 eps N^2 + cN + r, -eps N^2 - cN]
        let n = 16;
        let mesh = uniform_mesh(n);
        let eps = 1e-3;
        let (c, r) = (2.0, 1.0);
        let (a, _) = assemble_upwind_1d(&mesh, &const_problem_1d(c, r), eps);
        let nf = n as f64;
        for i in 1..a.n() - 1 {
            assert!((a.sub[i - 1] - (-eps * nf * nf)).abs() < 1e-9 * eps * nf * nf);
            assert!((a.diag[i] - (2.0 * eps * nf * nf + c * nf + r)).abs() < 1e-9);
            assert!((a.sup[i] - (-eps * nf * nf - c * nf)).abs() < 1e-9);
        }
    }

    #[test]
    fn upwind_layer_stencil_scale() {
        // inside the layer h ~ eps/N (up to the ln N factor): sub ~ -N^2/eps
        let n = 128;
        let eps = 1e-8;
        let mesh = build_shishkin_1d(eps, n, 1.0).unwrap();
        let p = example_1d(eps);
        let (a, _) = assemble_upwind_1d(&mesh, &p, eps);
        let h = mesh.h(2);
        let expected_sub = -eps / (h * h);
        assert!((a.sub[0] - expected_sub).abs() < 1e-6 * expected_sub.abs());
        assert!(a.sub[0].abs() > 1e9); // diffusion dominates in the layer
    }

    #[test]
    fn upwind_rows_weakly_diagonally_dominant() {
        for n in [8usize, 16, 32, 64, 128, 256] {
            for eps in [1.0, 1e-2, 1e-4, 1e-8] {
                let mesh = build_shishkin_1d(eps, n, 1.0).unwrap();
                let p = example_1d(eps);
                let (a, _) = assemble_upwind_1d(&mesh, &p, eps);
                for i in 0..a.n() {
                    let off = if i > 0 { a.sub[i - 1].abs() } else { 0.0 }
                        + if i + 1 < a.n() { a.sup[i].abs() } else { 0.0 };
                    assert!(a.diag[i] > 0.0);
                    assert!(a.diag[i] >= off - 1e-12 * a.diag[i]);
                    if i > 0 {
                        assert!(a.sub[i - 1] <= 0.0);
                    }
                    if i + 1 < a.n() {
                        assert!(a.sup[i] <= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn central_sign_pattern_flips_with_eps() {
        // eps = 1, h = 1/8, c = 1: sub = -64 + 4 < 0; eps = 1e-6: sub ~ +4 > 0
        let mesh = uniform_mesh(8);
        let p = const_problem_1d(1.0, 0.0);
        let a = assemble_central_1d(&mesh, &p, 1.0);
        assert!((a.sub[0] - (-60.0)).abs() < 1e-9);
        let a = assemble_central_1d(&mesh, &p, 1e-6);
        assert!(a.sub[0] > 3.9 && a.sub[0] < 4.1);
    }

    #[test]
    fn upwind_2d_m_matrix_rows() {
        for n in [8usize, 16, 32] {
            for eps in [1.0, 1e-2, 1e-4, 1e-8] {
                let case = exponential_case(eps);
                let mesh =
                    build_shishkin_2d(eps, n, LayerCase::TwoExponential, 2.0, Some(3.0), 2.5)
                        .unwrap();
                let part = partition_regions(&mesh);
                let (a, _) = assemble_upwind_2d(&mesh, &case.problem, eps, &part).unwrap();
                for row in 0..a.nrows() {
                    let mut sum = 0.0;
                    for (c, v) in a.row(row) {
                        sum += v;
                        if c == row {
                            assert!(v > 0.0);
                        } else {
                            assert!(v <= 0.0);
                        }
                    }
                    assert!(sum >= -1e-9 * a.get(row, row), "row {row} sum {sum}");
                }
            }
        }
    }

    #[test]
    fn upwind_2d_matches_dense_oracle_n4() {
        // N=4, eps=1, clamped uniform mesh, c1=1, c2=0, r=0: independent
        // dense assembly in natural lexicographic ordering
        let n = 4;
        let mesh =
            build_shishkin_2d(1.0, n, LayerCase::ParabolicExponential, 1.0, None, 2.5).unwrap();
        let case = crate::problem::test_support::constant_2d(1.0, 0.0, 0.0);
        let part = partition_regions(&mesh);
        let (a, _) = assemble_upwind_2d(&mesh, &case, 1.0, &part).unwrap();

        let nf = n as f64;
        let h = 1.0 / nf;
        let m = n - 1;
        for j in 1..n {
            for i in 1..n {
                let row = part.global_index(i, j);
                // oracle: eps=1 5-point Laplacian plus upwind convection
                let center = 4.0 / (h * h) + 1.0 / h;
                let west = -1.0 / (h * h);
                let east = -1.0 / (h * h) - 1.0 / h;
                let ns = -1.0 / (h * h);
                assert!((a.get(row, row) - center).abs() < 1e-10);
                if i > 1 {
                    assert!((a.get(row, part.global_index(i - 1, j)) - west).abs() < 1e-10);
                }
                if i < m {
                    assert!((a.get(row, part.global_index(i + 1, j)) - east).abs() < 1e-10);
                }
                if j > 1 {
                    assert!((a.get(row, part.global_index(i, j - 1)) - ns).abs() < 1e-10);
                }
                if j < m {
                    assert!((a.get(row, part.global_index(i, j + 1)) - ns).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn assembling_with_nonpositive_c1_errors() {
        let n = 8;
        let mesh =
            build_shishkin_2d(1e-2, n, LayerCase::ParabolicExponential, 1.0, None, 2.5).unwrap();
        let bad = crate::problem::test_support::constant_2d(0.0, 0.0, 0.0);
        let part = partition_regions(&mesh);
        assert!(assemble_upwind_2d(&mesh, &bad, 1e-2, &part).is_err());
    }

    #[test]
    fn constant_vector_image_is_reaction_coefficient() {
        // (A w)_i = r_i for w = 1, in 1D and 2D
        let eps = 1e-4;
        let mesh1 = build_shishkin_1d(eps, 64, 1.0).unwrap();
        let p1 = example_1d(eps);
        let (a1, _) = assemble_upwind_1d(&mesh1, &p1, eps);
        let ones = vec![1.0; a1.n()];
        let mut y = vec![0.0; a1.n()];
        a1.matvec(&ones, &mut y);
        for (i, v) in y.iter().enumerate() {
            // boundary-adjacent rows pick up the eliminated Dirichlet columns
            let i1 = i + 1;
            if i1 > 1 && i1 < a1.n() {
                assert!((v - 1.0).abs() < 1e-6, "row {i}: {v}");
            } else {
                assert!(*v >= 1.0 - 1e-6);
            }
        }

        let case = parabolic_case(eps);
        let mesh2 =
            build_shishkin_2d(eps, 16, LayerCase::ParabolicExponential, 1.0, None, 2.5).unwrap();
        let part = partition_regions(&mesh2);
        let (a2, _) = assemble_upwind_2d(&mesh2, &case.problem, eps, &part).unwrap();
        let ones = vec![1.0; a2.nrows()];
        let mut y = vec![0.0; a2.nrows()];
        csr_matvec(&a2, &ones, &mut y);
        for v in &y {
            assert!(*v >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn barrier_vector_bounds_inverse() {
        // convection pushes toward x = 0, so the decreasing barrier
        // W = 2 - x satisfies A W >= c1_lower pointwise
        let eps = 1e-6;
        let case = exponential_case(eps);
        let mesh =
            build_shishkin_2d(eps, 16, LayerCase::TwoExponential, 2.0, Some(3.0), 2.5).unwrap();
        let part = partition_regions(&mesh);
        let (a, _) = assemble_upwind_2d(&mesh, &case.problem, eps, &part).unwrap();
        let mut nodes = Vec::new();
        for list in [&part.corner, &part.edge_x, &part.edge_y, &part.interior] {
            nodes.extend_from_slice(list);
        }
        let w: Vec<f64> = nodes
            .iter()
            .map(|&(i, _)| 2.0 - mesh.x_mesh.points()[i])
            .collect();
        let mut y = vec![0.0; a.nrows()];
        csr_matvec(&a, &w, &mut y);
        for v in &y {
            assert!(*v >= case.problem.c1_lower - 1e-8);
        }
    }

    #[test]
    fn rescale_round_trip() {
        let eps = 1e-4;
        let case = parabolic_case(eps);
        let mesh =
            build_shishkin_2d(eps, 16, LayerCase::ParabolicExponential, 1.0, None, 2.5).unwrap();
        let part = partition_regions(&mesh);
        let (a, _) = assemble_upwind_2d(&mesh, &case.problem, eps, &part).unwrap();
        let corner_ids: Vec<usize> = (0..part.corner.len()).collect();
        let block = a.sub_block(&corner_ids, &corner_ids);
        let (scaled, s) = rescale_rows_fd_to_fe(&block, &part.corner, &mesh);
        assert!(s.iter().all(|&v| v > 0.0));
        for (r, &sr) in s.iter().enumerate() {
            for ((c1, v1), (c2, v2)) in block.row(r).zip(scaled.row(r)) {
                assert_eq!(c1, c2);
                let back = v2 / sr;
                assert!((back - v1).abs() <= 1e-15 * v1.abs());
            }
        }
    }

    #[test]
    fn matrix_market_header_and_indices() {
        let t = TridiagonalMatrix {
            sub: vec![-1.0],
            diag: vec![2.0, 2.0],
            sup: vec![-1.0],
        };
        let mut buf = Vec::new();
        t.to_csr().write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "%%MatrixMarket matrix coordinate real general"
        );
        assert_eq!(lines.next().unwrap(), "2 2 4");
        assert!(lines.next().unwrap().starts_with("1 1 "));
    }
}
