//! Block upper-triangular preconditioner for the 2D upwind operator.
//!
//! Under the region-block ordering (corner, x-edge, y-edge, interior)
//! the convection pushes information from the interior toward the
//! layers, so a block back substitution that keeps every coupling above
//! the block diagonal captures the dominant flow.  The diagonal blocks
//! are approximated region by region:
//!
//! - interior: its upper-triangular part (pointwise downstream
//!   Gauss-Seidel from the top-right corner);
//! - y-edge (right of the x-layer): tridiagonal line solves along
//!   constant x, sweeping right to left, carrying the solved east
//!   coupling and dropping the west one;
//! - x-edge (above the y-layer): line solves along constant y, sweeping
//!   top to bottom, carrying the north coupling and dropping the south;
//! - corner: a multigrid solve (or an exact factorization, used as the
//!   idealized reference in analysis and tests).
//!
//! Every coupling the preconditioner drops is a non-positive off-diagonal
//! entry of the M-matrix, so M = A + N with N >= 0 is a regular
//! splitting and the stationary error operator I - M^{-1}A has spectral
//! radius below one.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::discretize::{stencil_2d, CsrMatrix};
use crate::krylov::Preconditioner;
use crate::linalg::{
    csr_matvec, power_iteration, thomas_factor, thomas_solve, DenseLu, DenseMatrix,
    FactoredTridiagonal, PowerIteration,
};
use crate::mesh::{LayerCase, Mesh2D, Region, RegionPartition};
use crate::mgcorner::{
    build_fullcoarsen_redisc_hierarchy, build_semicoarsen_hierarchy, CornerHierarchy,
};
use crate::problem::Problem2D;
use crate::Result;

/// Approximate solver for the corner diagonal block.
pub enum CornerSolver {
    /// Residual-reduction multigrid cycles (the production choice).
    Multigrid(CornerHierarchy),
    /// Dense LU of the corner block; the idealized preconditioner.
    Exact(DenseLu),
}

/// Tridiagonal line solves for one edge region, plus the coupling from
/// each line to the next one in the sweep.
struct LineBlock {
    /// One factored tridiagonal per line, in storage order.
    lines: Vec<FactoredTridiagonal>,
    /// coupling[l][k] multiplies unknown k of line l+1 in the rhs of
    /// line l; empty for the last line.
    coupling: Vec<Vec<f64>>,
}

pub struct BlockPreconditioner2D {
    /// Lengths of the corner, x-edge, y-edge, and interior blocks.
    len: [usize; 4],
    /// Number of y-edge lines (constant x) and their length.
    wy: usize,
    ly: usize,
    /// X-edge line length (constant y) and number of lines.
    wx: usize,
    lx: usize,
    a_ii: CsrMatrix,
    y_lines: LineBlock,
    x_lines: LineBlock,
    a_yi: CsrMatrix,
    a_xy: CsrMatrix,
    a_xi: CsrMatrix,
    a_cx: CsrMatrix,
    a_cy: CsrMatrix,
    a_ci: CsrMatrix,
    corner: CornerSolver,
    flops: AtomicU64,
    mg_cycles: AtomicU64,
    applications: AtomicU64,
}

/// Assemble the preconditioner from the block-ordered operator `a`.
///
/// The corner block is solved by the multigrid cycle matching the
/// problem's layer structure, or exactly when `exact_corner` is set.
pub fn build_preconditioner_2d(
    mesh: &Mesh2D,
    problem: &Problem2D,
    eps: f64,
    part: &RegionPartition,
    a: &CsrMatrix,
    exact_corner: bool,
) -> Result<BlockPreconditioner2D> {
    let n = part.n();
    let tx = mesh.x_mesh.transition_index();
    let ty = mesh.y_mesh.transition_index();
    let len = [
        part.len(Region::Corner),
        part.len(Region::EdgeX),
        part.len(Region::EdgeY),
        part.len(Region::Interior),
    ];
    let ids = |r: Region| -> Vec<usize> {
        let o = part.offset(r);
        (o..o + part.len(r)).collect()
    };
    let (cids, xids, yids, iids) = (
        ids(Region::Corner),
        ids(Region::EdgeX),
        ids(Region::EdgeY),
        ids(Region::Interior),
    );

    // y-edge lines: constant x = x_i, i = tx+1..N-1, unknowns j = 1..ty
    let (wy, ly) = (n - 1 - tx, ty);
    let mut y_lines = Vec::with_capacity(wy);
    let mut y_coupling = Vec::with_capacity(wy);
    for i in tx + 1..n {
        let mut t = crate::discretize::TridiagonalMatrix {
            sub: Vec::with_capacity(ly - 1),
            diag: Vec::with_capacity(ly),
            sup: Vec::with_capacity(ly - 1),
        };
        let mut east = Vec::with_capacity(ly);
        for j in 1..=ty {
            let [_w, s, c, e, nn] = stencil_2d(mesh, problem, eps, i, j);
            if j > 1 {
                t.sub.push(s);
            }
            t.diag.push(c);
            if j < ty {
                t.sup.push(nn);
            }
            east.push(e);
        }
        y_lines.push(thomas_factor(&t)?);
        if i < n - 1 {
            y_coupling.push(east);
        }
    }

    // x-edge lines: constant y = y_j, j = ty+1..N-1, unknowns i = 1..tx
    let (wx, lx) = (tx, n - 1 - ty);
    let mut x_lines = Vec::with_capacity(lx);
    let mut x_coupling = Vec::with_capacity(lx);
    for j in ty + 1..n {
        let mut t = crate::discretize::TridiagonalMatrix {
            sub: Vec::with_capacity(wx - 1),
            diag: Vec::with_capacity(wx),
            sup: Vec::with_capacity(wx - 1),
        };
        let mut north = Vec::with_capacity(wx);
        for i in 1..=tx {
            let [w, _s, c, e, nn] = stencil_2d(mesh, problem, eps, i, j);
            if i > 1 {
                t.sub.push(w);
            }
            t.diag.push(c);
            if i < tx {
                t.sup.push(e);
            }
            north.push(nn);
        }
        x_lines.push(thomas_factor(&t)?);
        if j < n - 1 {
            x_coupling.push(north);
        }
    }

    let corner = if exact_corner {
        let a_cc = a.sub_block(&cids, &cids);
        CornerSolver::Exact(DenseLu::factor(&DenseMatrix::from_csr(&a_cc))?)
    } else {
        let h = match problem.layer_case {
            LayerCase::ParabolicExponential => build_semicoarsen_hierarchy(mesh, problem, eps)?,
            LayerCase::TwoExponential => build_fullcoarsen_redisc_hierarchy(mesh, problem, eps)?,
        };
        CornerSolver::Multigrid(h)
    };

    Ok(BlockPreconditioner2D {
        len,
        wy,
        ly,
        wx,
        lx,
        a_ii: a.sub_block(&iids, &iids),
        y_lines: LineBlock {
            lines: y_lines,
            coupling: y_coupling,
        },
        x_lines: LineBlock {
            lines: x_lines,
            coupling: x_coupling,
        },
        a_yi: a.sub_block(&yids, &iids),
        a_xy: a.sub_block(&xids, &yids),
        a_xi: a.sub_block(&xids, &iids),
        a_cx: a.sub_block(&cids, &xids),
        a_cy: a.sub_block(&cids, &yids),
        a_ci: a.sub_block(&cids, &iids),
        corner,
        flops: AtomicU64::new(0),
        mg_cycles: AtomicU64::new(0),
        applications: AtomicU64::new(0),
    })
}

impl BlockPreconditioner2D {
    pub fn n(&self) -> usize {
        self.len.iter().sum()
    }

    /// Total multigrid cycles spent in corner solves so far.
    pub fn mg_cycles_total(&self) -> u64 {
        self.mg_cycles.load(Ordering::Relaxed)
    }

    /// Number of preconditioner applications so far.
    pub fn applications(&self) -> u64 {
        self.applications.load(Ordering::Relaxed)
    }

    fn offsets(&self) -> [usize; 4] {
        let [c, x, y, _] = self.len;
        [0, c, c + x, c + x + y]
    }

    /// Subtract `block * src` from `dst` and count the flops.
    fn sub_matvec(&self, block: &CsrMatrix, src: &[f64], dst: &mut [f64]) {
        let mut tmp = vec![0.0; block.nrows()];
        csr_matvec(block, src, &mut tmp);
        for (d, t) in dst.iter_mut().zip(&tmp) {
            *d -= t;
        }
        self.flops.fetch_add(
            2 * block.nnz() as u64 + block.nrows() as u64,
            Ordering::Relaxed,
        );
    }
}

impl Preconditioner for BlockPreconditioner2D {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        assert_eq!(r.len(), self.n());
        assert_eq!(z.len(), self.n());
        let [oc, ox, oy, oi] = self.offsets();
        let [lc, lx_len, ly_len, li] = self.len;

        // interior: back substitution on the upper-triangular part
        {
            let (zs, rs) = (oi, oi + li);
            let mut sweep_flops = 0u64;
            let a = &self.a_ii;
            // initialize so z[col] reads below touch finished entries only
            for idx in (0..li).rev() {
                let mut acc = r[zs + idx];
                let mut diag = 0.0;
                for (col, val) in a.row(idx) {
                    if col == idx {
                        diag = val;
                    } else if col > idx {
                        acc -= val * z[zs + col];
                    }
                }
                z[zs + idx] = acc / diag;
                sweep_flops += 2 * a.row_nnz(idx) as u64;
            }
            self.flops.fetch_add(sweep_flops, Ordering::Relaxed);
            debug_assert_eq!(rs, r.len());
        }

        // y-edge: line solves right to left, east coupling to the rhs
        {
            let mut rhs: Vec<f64> = r[oy..oy + ly_len].to_vec();
            self.sub_matvec(&self.a_yi, &z[oi..oi + li], &mut rhs);
            let (wy, ly) = (self.wy, self.ly);
            let mut line = vec![0.0; ly];
            for l in (0..wy).rev() {
                for k in 0..ly {
                    line[k] = rhs[k * wy + l];
                    if l + 1 < wy {
                        line[k] -= self.y_lines.coupling[l][k] * z[oy + k * wy + l + 1];
                    }
                }
                let sol = thomas_solve(&self.y_lines.lines[l], &line);
                for k in 0..ly {
                    z[oy + k * wy + l] = sol[k];
                }
            }
            self.flops.fetch_add(10 * ly_len as u64, Ordering::Relaxed);
        }

        // x-edge: line solves top to bottom, north coupling to the rhs
        {
            let mut rhs: Vec<f64> = r[ox..ox + lx_len].to_vec();
            self.sub_matvec(&self.a_xy, &z[oy..oy + ly_len], &mut rhs);
            self.sub_matvec(&self.a_xi, &z[oi..oi + li], &mut rhs);
            let (wx, lx) = (self.wx, self.lx);
            let mut line = vec![0.0; wx];
            for l in (0..lx).rev() {
                for k in 0..wx {
                    line[k] = rhs[l * wx + k];
                    if l + 1 < lx {
                        line[k] -= self.x_lines.coupling[l][k] * z[ox + (l + 1) * wx + k];
                    }
                }
                let sol = thomas_solve(&self.x_lines.lines[l], &line);
                z[ox + l * wx..ox + (l + 1) * wx].copy_from_slice(&sol);
            }
            self.flops.fetch_add(10 * lx_len as u64, Ordering::Relaxed);
        }

        // corner
        {
            let mut rhs: Vec<f64> = r[oc..oc + lc].to_vec();
            self.sub_matvec(&self.a_cx, &z[ox..ox + lx_len], &mut rhs);
            self.sub_matvec(&self.a_cy, &z[oy..oy + ly_len], &mut rhs);
            self.sub_matvec(&self.a_ci, &z[oi..oi + li], &mut rhs);
            match &self.corner {
                CornerSolver::Exact(lu) => {
                    z[oc..oc + lc].copy_from_slice(&lu.solve(&rhs));
                    self.flops
                        .fetch_add(2 * (lc as u64) * (lc as u64), Ordering::Relaxed);
                }
                CornerSolver::Multigrid(h) => {
                    let (zc, cycles) = h.solve(&rhs)?;
                    z[oc..oc + lc].copy_from_slice(&zc);
                    self.mg_cycles.fetch_add(cycles as u64, Ordering::Relaxed);
                    self.flops
                        .fetch_add(cycles as u64 * h.cycle_flops(), Ordering::Relaxed);
                }
            }
        }

        self.applications.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    fn flops(&self) -> u64 {
        self.flops.load(Ordering::Relaxed)
    }
}

/// Estimate the spectral radius of the stationary error operator
/// I - M^{-1}A by power iteration.
pub fn error_propagation_radius(
    a: &CsrMatrix,
    m: &BlockPreconditioner2D,
    max_iters: usize,
) -> Result<PowerIteration> {
    let n = a.nrows();
    let mut failed = None;
    let pw = power_iteration(
        |v: &[f64], out: &mut [f64]| {
            let mut av = vec![0.0; n];
            csr_matvec(a, v, &mut av);
            let mut z = vec![0.0; n];
            if let Err(e) = m.apply(&av, &mut z) {
                failed = Some(e);
                out.copy_from_slice(v);
                return;
            }
            for ((o, vi), zi) in out.iter_mut().zip(v).zip(&z) {
                *o = vi - zi;
            }
        },
        n,
        max_iters,
        1e-8,
    );
    match failed {
        Some(e) => Err(e),
        None => Ok(pw),
    }
}

/// Classify a global coupling (row, col) of the block-ordered operator:
/// true when the preconditioner keeps it, false when it is dropped.
///
/// Used to verify that every dropped entry is non-positive, making
/// M = A + N a regular splitting.
pub fn coupling_is_kept(part: &RegionPartition, row: usize, col: usize) -> bool {
    if row == col {
        return true;
    }
    let (rr, rc) = (part.region_of(row), part.region_of(col));
    let order = |r: Region| match r {
        Region::Corner => 0,
        Region::EdgeX => 1,
        Region::EdgeY => 2,
        Region::Interior => 3,
    };
    if order(rc) > order(rr) {
        return true; // above the block diagonal
    }
    if order(rc) < order(rr) {
        return false; // below the block diagonal
    }
    // within one diagonal block: recover mesh coordinates
    let nodes = part.nodes(rr);
    let off = part.offset(rr);
    let (i1, j1) = nodes[row - off];
    let (i2, j2) = nodes[col - off];
    match rr {
        Region::Corner => true,
        // line solves along constant y keep the line and the north coupling
        Region::EdgeX => j1 == j2 || (i1 == i2 && j2 == j1 + 1),
        // line solves along constant x keep the line and the east coupling
        Region::EdgeY => i1 == i2 || (j1 == j2 && i2 == i1 + 1),
        // pointwise upper-triangular sweep
        Region::Interior => col > row,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::assemble_upwind_2d;
    use crate::krylov::{fgmres_2d, StoppingRule};
    use crate::linalg::{dense_lu_solve, max_norm};
    use crate::mesh::{build_shishkin_2d, partition_regions};
    use crate::problem::{exponential_case, parabolic_case};

    fn setup(
        eps: f64,
        n: usize,
        case: LayerCase,
    ) -> (Mesh2D, Problem2D, RegionPartition, CsrMatrix, Vec<f64>) {
        let (problem, mesh) = match case {
            LayerCase::ParabolicExponential => {
                let c = parabolic_case(eps);
                let m = build_shishkin_2d(eps, n, case, 0.99, None, 2.5).unwrap();
                (c.problem, m)
            }
            LayerCase::TwoExponential => {
                let c = exponential_case(eps);
                let m = build_shishkin_2d(eps, n, case, 1.99, Some(2.99), 2.5).unwrap();
                (c.problem, m)
            }
        };
        let part = partition_regions(&mesh);
        let (a, b) = assemble_upwind_2d(&mesh, &problem, eps, &part).unwrap();
        (mesh, problem, part, a, b)
    }

    /// Dense ideal preconditioner matrix built from the kept-coupling
    /// predicate, with the corner block kept in full.
    fn dense_ideal(part: &RegionPartition, a: &CsrMatrix) -> DenseMatrix {
        let n = a.nrows();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for row in 0..n {
            rows.push(
                a.row(row)
                    .filter(|&(col, _)| coupling_is_kept(part, row, col))
                    .collect(),
            );
        }
        DenseMatrix::from_csr(&CsrMatrix::from_rows(n, n, &rows))
    }

    #[test]
    fn apply_round_trips_against_dense_ideal() {
        for case in [LayerCase::ParabolicExponential, LayerCase::TwoExponential] {
            let eps = 1e-6;
            let (mesh, problem, part, a, _) = setup(eps, 16, case);
            let m = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, true).unwrap();
            let md = dense_ideal(&part, &a);
            let r: Vec<f64> = (0..a.nrows()).map(|k| (k as f64 * 0.43).sin()).collect();
            let mut z = vec![0.0; r.len()];
            m.apply(&r, &mut z).unwrap();
            let want = dense_lu_solve(&md, &r).unwrap();
            let scale = want.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            for (got, w) in z.iter().zip(&want) {
                assert!(
                    (got - w).abs() <= 1e-9 * scale,
                    "{case:?}: {got} vs {w} (scale {scale:.3e})"
                );
            }
        }
    }

    #[test]
    fn every_dropped_coupling_is_nonpositive() {
        for case in [LayerCase::ParabolicExponential, LayerCase::TwoExponential] {
            let eps = 1e-7;
            let (_mesh, _problem, part, a, _) = setup(eps, 32, case);
            let mut kept = 0usize;
            let mut dropped = 0usize;
            for row in 0..a.nrows() {
                for (col, val) in a.row(row) {
                    if coupling_is_kept(&part, row, col) {
                        kept += 1;
                    } else {
                        dropped += 1;
                        assert!(val <= 0.0, "dropped coupling ({row},{col}) = {val} > 0");
                    }
                }
            }
            assert_eq!(kept + dropped, a.nnz());
            assert!(dropped > 0, "the preconditioner must drop something");
        }
    }

    #[test]
    fn ideal_error_radius_below_one() {
        for case in [LayerCase::ParabolicExponential, LayerCase::TwoExponential] {
            let eps = 1e-6;
            let (mesh, problem, part, a, _) = setup(eps, 32, case);
            let m = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, true).unwrap();
            let pw = error_propagation_radius(&a, &m, 300).unwrap();
            assert!(pw.estimate.abs() < 0.5, "{case:?}: radius {}", pw.estimate);
        }
    }

    #[test]
    fn multigrid_corner_tracks_exact_corner() {
        for case in [LayerCase::ParabolicExponential, LayerCase::TwoExponential] {
            let eps = 1e-6;
            let (mesh, problem, part, a, _) = setup(eps, 32, case);
            let exact = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, true).unwrap();
            let mg = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, false).unwrap();
            let r: Vec<f64> = (0..a.nrows())
                .map(|k| ((k * 13 % 7) as f64) - 3.0)
                .collect();
            let mut ze = vec![0.0; r.len()];
            let mut zm = vec![0.0; r.len()];
            exact.apply(&r, &mut ze).unwrap();
            mg.apply(&r, &mut zm).unwrap();
            assert!(mg.mg_cycles_total() >= 1);
            // edge and interior parts are identical; corner agrees to the
            // multigrid residual-reduction tolerance
            let diff: Vec<f64> = ze.iter().zip(&zm).map(|(a, b)| a - b).collect();
            let rel = max_norm(&diff) / max_norm(&ze);
            assert!(rel < 0.3, "{case:?}: corner mismatch {rel}");
            let lc = part.len(Region::Corner);
            for k in lc..r.len() {
                assert_eq!(ze[k], zm[k]);
            }
        }
    }

    #[test]
    fn flop_counter_accumulates() {
        let eps = 1e-6;
        let (mesh, problem, part, a, _) = setup(eps, 16, LayerCase::TwoExponential);
        let m = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, false).unwrap();
        assert_eq!(m.flops(), 0);
        let r = vec![1.0; a.nrows()];
        let mut z = vec![0.0; a.nrows()];
        m.apply(&r, &mut z).unwrap();
        let one = m.flops();
        assert!(one > 0);
        m.apply(&r, &mut z).unwrap();
        assert!(m.flops() > one);
        assert_eq!(m.applications(), 2);
    }

    #[test]
    fn preconditioned_fgmres_converges() {
        for case in [LayerCase::ParabolicExponential, LayerCase::TwoExponential] {
            let eps = 1e-7;
            let (mesh, problem, part, a, b) = setup(eps, 64, case);
            let m = build_preconditioner_2d(&mesh, &problem, eps, &part, &a, false).unwrap();
            let rule = StoppingRule::euclid_2d(64);
            let (x, stats) = fgmres_2d(&a, &b, &m, &rule, 60).unwrap();
            assert!(stats.converged, "{case:?} did not converge");
            assert!(stats.iterations <= 10, "{case:?}: {}", stats.iterations);
            let mut res = vec![0.0; b.len()];
            csr_matvec(&a, &x, &mut res);
            for (ri, bi) in res.iter_mut().zip(&b) {
                *ri = bi - *ri;
            }
            let nrm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(nrm <= rule.threshold * (1.0 + 1e-10));
        }
    }
}
