//! Benchmark harness: reproduces the solver's convergence tables as CSV
//! rows and runs the spectral and structural verification suites.
//!
//! Tables follow the protocol of the solver library: 1D errors are
//! measured against a direct solve on the same-transition-point mesh with
//! 64N intervals, 2D errors against the manufactured solutions in the
//! discrete maximum norm.  Timing columns are informational only; every
//! other column is deterministic for a given spec.

use std::time::Instant;

use blprec::discretize::{assemble_upwind_1d, assemble_upwind_2d, CsrMatrix};
use blprec::krylov::{fgmres_2d, gmres_1d, SolveStats, StoppingRule};
use blprec::linalg::{max_norm, thomas_factor, thomas_solve, BandedLu};
use blprec::mesh::{
    build_shishkin_1d, build_shishkin_2d, partition_1d, partition_regions, LayerCase, Mesh1D,
    Mesh2D, RegionPartition,
};
use blprec::mgcorner::build_semicoarsen_hierarchy;
use blprec::precond1d::{apply_m_inverse, build_preconditioner_1d, verify_spectrum};
use blprec::precond2d::{build_preconditioner_2d, error_propagation_radius};
use blprec::problem::{example_1d, exponential_case, parabolic_case, ManufacturedCase};
use rayon::prelude::*;

/// Benchmark family a table row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    OneD,
    Parabolic2D,
    Exponential2D,
}

impl CaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseKind::OneD => "1d",
            CaseKind::Parabolic2D => "parabolic",
            CaseKind::Exponential2D => "exponential",
        }
    }
}

/// Mesh constants sitting strictly below the convection minima of each
/// benchmark problem (the transition-point formulas need strict bounds).
pub const C_LOWER_1D: f64 = 0.99;
pub const C_LOWER_PARABOLIC: f64 = 0.99;
pub const C_LOWER_EXPONENTIAL: (f64, f64) = (1.99, 2.99);

/// One table-reproduction run: a case crossed with parameter lists.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub case: CaseKind,
    pub eps_list: Vec<f64>,
    pub n_list: Vec<usize>,
    /// 1D stopping constant K in K ln(N)/N.
    pub k_const: f64,
    /// Transition-point factor sigma.
    pub sigma: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Spec preloaded with the parameter grid of the corresponding
    /// published table.
    pub fn with_defaults(case: CaseKind) -> Self {
        let (eps_list, n_list) = match case {
            CaseKind::OneD => (
                vec![1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
                vec![128, 256, 512, 1024],
            ),
            CaseKind::Parabolic2D => (vec![1e-5, 1e-6, 1e-7, 1e-8], vec![128, 256, 512]),
            CaseKind::Exponential2D => (vec![1e-4, 1e-5, 1e-6, 1e-7], vec![128, 256, 512]),
        };
        ExperimentSpec {
            case,
            eps_list,
            n_list,
            k_const: 1.0,
            sigma: 2.5,
            max_iters: 200,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for &eps in &self.eps_list {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(format!("eps {eps} outside (0, 1]"));
            }
        }
        for &n in &self.n_list {
            if n < 8 || n % 2 != 0 {
                return Err(format!("mesh parameter N = {n} must be even and >= 8"));
            }
            if self.case == CaseKind::Exponential2D && !n.is_power_of_two() {
                return Err(format!(
                    "N = {n}: full-coarsening multigrid needs a power of two"
                ));
            }
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(format!("sigma {} must be positive", self.sigma));
        }
        Ok(())
    }
}

/// One cell of a reproduced table.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub case: CaseKind,
    pub eps: f64,
    pub n: usize,
    /// Discrete max-norm error against the benchmark/exact solution.
    pub error: f64,
    pub iters: usize,
    pub setup_s: f64,
    pub solve_s: f64,
    /// Mean multigrid cycles per preconditioner application (0 in 1D).
    pub mg_cycles: f64,
    pub converged: bool,
    /// Mean instrumented flops per Krylov iteration (0 in 1D).
    pub flops_per_iter: f64,
}

/// Build the manufactured 2D case for a table kind.
pub fn manufactured_case(kind: CaseKind, eps: f64) -> ManufacturedCase {
    match kind {
        CaseKind::Parabolic2D => parabolic_case(eps),
        CaseKind::Exponential2D => exponential_case(eps),
        CaseKind::OneD => panic!("manufactured_case is 2D-only"),
    }
}

/// Shishkin mesh for a 2D case with the benchmark mesh constants.
pub fn mesh_2d(kind: CaseKind, eps: f64, n: usize, sigma: f64) -> blprec::Result<Mesh2D> {
    match kind {
        CaseKind::Parabolic2D => build_shishkin_2d(
            eps,
            n,
            LayerCase::ParabolicExponential,
            C_LOWER_PARABOLIC,
            None,
            sigma,
        ),
        CaseKind::Exponential2D => build_shishkin_2d(
            eps,
            n,
            LayerCase::TwoExponential,
            C_LOWER_EXPONENTIAL.0,
            Some(C_LOWER_EXPONENTIAL.1),
            sigma,
        ),
        CaseKind::OneD => panic!("mesh_2d is 2D-only"),
    }
}

/// Max-norm error of the 1D direct solve against the benchmark solve on
/// the same-transition-point mesh with 64 times as many intervals,
/// compared at the shared meshpoints.
pub fn benchmark_error_1d(mesh: &Mesh1D, u: &[f64], eps: f64) -> blprec::Result<f64> {
    let problem = example_1d(eps);
    let fine = mesh.refine(64);
    let (af, bf) = assemble_upwind_1d(&fine, &problem, eps);
    let uf = thomas_solve(&thomas_factor(&af)?, &bf);
    let mut err: f64 = 0.0;
    for i in 1..mesh.n() {
        err = err.max((u[i - 1] - uf[64 * i - 1]).abs());
    }
    Ok(err)
}

fn run_cell_1d(spec: &ExperimentSpec, eps: f64, n: usize) -> blprec::Result<TableRow> {
    let setup = Instant::now();
    let mesh = build_shishkin_1d(eps, n, C_LOWER_1D)?;
    let problem = example_1d(eps);
    let (a, b) = assemble_upwind_1d(&mesh, &problem, eps);
    let (n_layer, _) = partition_1d(&mesh);
    let m = build_preconditioner_1d(&a, n_layer)?;
    let setup_s = setup.elapsed().as_secs_f64();

    let solve = Instant::now();
    let rule = StoppingRule::max_norm_1d(spec.k_const, n);
    let (_, stats) = gmres_1d(&a, &b, &m, &rule, spec.max_iters)?;
    let solve_s = solve.elapsed().as_secs_f64();

    // the error protocol compares direct solves, independent of GMRES
    let u = thomas_solve(&thomas_factor(&a)?, &b);
    let error = benchmark_error_1d(&mesh, &u, eps)?;
    Ok(TableRow {
        case: CaseKind::OneD,
        eps,
        n,
        error,
        iters: stats.iterations,
        setup_s,
        solve_s,
        mg_cycles: 0.0,
        converged: stats.converged,
        flops_per_iter: 0.0,
    })
}

fn mean_flops(stats: &SolveStats) -> f64 {
    if stats.flops_per_iteration.is_empty() {
        return 0.0;
    }
    let total: u64 = stats.flops_per_iteration.iter().sum();
    total as f64 / stats.flops_per_iteration.len() as f64
}

fn run_cell_2d(spec: &ExperimentSpec, eps: f64, n: usize) -> blprec::Result<TableRow> {
    let case = manufactured_case(spec.case, eps);
    let setup = Instant::now();
    let mesh = mesh_2d(spec.case, eps, n, spec.sigma)?;
    let part = partition_regions(&mesh);
    let (a, b) = assemble_upwind_2d(&mesh, &case.problem, eps, &part)?;
    let m = build_preconditioner_2d(&mesh, &case.problem, eps, &part, &a, false)?;
    let setup_s = setup.elapsed().as_secs_f64();

    let solve = Instant::now();
    let rule = StoppingRule::euclid_2d(n);
    let (x, stats) = fgmres_2d(&a, &b, &m, &rule, spec.max_iters)?;
    let solve_s = solve.elapsed().as_secs_f64();

    let mut error: f64 = 0.0;
    for j in 1..n {
        for i in 1..n {
            let g = part.global_index(i, j);
            let exact = case.u_exact(mesh.x_mesh.points()[i], mesh.y_mesh.points()[j]);
            error = error.max((x[g] - exact).abs());
        }
    }
    let applications = m.applications().max(1);
    Ok(TableRow {
        case: spec.case,
        eps,
        n,
        error,
        iters: stats.iterations,
        setup_s,
        solve_s,
        mg_cycles: m.mg_cycles_total() as f64 / applications as f64,
        converged: stats.converged,
        flops_per_iter: mean_flops(&stats),
    })
}

/// Run every (eps, N) cell of the experiment; cells are independent and run in
/// parallel, rows come back in eps-major order.
pub fn run_table(spec: &ExperimentSpec) -> blprec::Result<Vec<TableRow>> {
    let cells: Vec<(f64, usize)> = spec
        .eps_list
        .iter()
        .flat_map(|&eps| spec.n_list.iter().map(move |&n| (eps, n)))
        .collect();
    cells
        .par_iter()
        .map(|&(eps, n)| match spec.case {
            CaseKind::OneD => run_cell_1d(spec, eps, n),
            _ => run_cell_2d(spec, eps, n),
        })
        .collect()
}

/// C-style `%.6e` formatting (two-digit signed exponent).
pub fn fmt_e(x: f64) -> String {
    let s = format!("{x:.6e}");
    match s.find('e') {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().unwrap_or(0);
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{}e{}{:02}", &s[..pos], sign, exp.abs())
        }
        None => s,
    }
}

/// Render rows under the fixed schema
/// `case,eps,N,error,iters,setup_s,solve_s,mg_cycles`.
pub fn render_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("case,eps,N,error,iters,setup_s,solve_s,mg_cycles\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.case.as_str(),
            fmt_e(row.eps),
            row.n,
            fmt_e(row.error),
            row.iters,
            fmt_e(row.setup_s),
            fmt_e(row.solve_s),
            fmt_e(row.mg_cycles),
        ));
    }
    out
}

/// Direct banded-LU reference solve of the block-ordered 2D system.
///
/// The block ordering scatters the five-point couplings, so the system is
/// permuted to lexicographic order (bandwidth N+1), factored, solved, and
/// permuted back.
pub fn direct_solve_2d(
    part: &RegionPartition,
    a: &CsrMatrix,
    b: &[f64],
    n: usize,
) -> blprec::Result<Vec<f64>> {
    let total = (n - 1) * (n - 1);
    assert_eq!(a.nrows(), total);
    // lex_of[block index] = lexicographic index
    let mut lex_of = vec![0usize; total];
    let mut block_of = vec![0usize; total];
    for j in 1..n {
        for i in 1..n {
            let lex = (j - 1) * (n - 1) + (i - 1);
            let blk = part.global_index(i, j);
            lex_of[blk] = lex;
            block_of[lex] = blk;
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(total);
    let mut rhs = vec![0.0; total];
    for lex in 0..total {
        let blk = block_of[lex];
        rhs[lex] = b[blk];
        let mut row: Vec<(usize, f64)> = a.row(blk).map(|(c, v)| (lex_of[c], v)).collect();
        row.sort_by_key(|&(c, _)| c);
        rows.push(row);
    }
    let lex = CsrMatrix::from_rows(total, total, &rows);
    let lu = BandedLu::factor_csr(&lex, n + 1)?;
    let x_lex = lu.solve(&rhs);
    let mut x = vec![0.0; total];
    for (l, &blk) in block_of.iter().enumerate() {
        x[blk] = x_lex[l];
    }
    Ok(x)
}

/// Outcome of a single verification check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Collection of verification checks with an overall verdict.
#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

fn lcg(seed: &mut u64) -> f64 {
    *seed = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
}

/// Run the verification suite over the given 1D parameter grid: spectral
/// bounds, unit-eigenvalue structure, 2D splitting radius, Galerkin
/// coarse-operator exactness, and a corrupted-preconditioner negative
/// control.  Empty parameter lists yield an empty, passing report.
pub fn run_verification(eps_list: &[f64], n_list: &[usize], seed: u64) -> VerificationReport {
    let mut report = VerificationReport::default();
    if eps_list.is_empty() || n_list.is_empty() {
        return report;
    }

    // spectral bound sweep for the 1D preconditioned operator
    for &eps in eps_list {
        for &n in n_list {
            let name = format!("1d spectral bound eps={eps:.0e} N={n}");
            let cell = (|| -> blprec::Result<(f64, f64, bool)> {
                let mesh = build_shishkin_1d(eps, n, C_LOWER_1D)?;
                let problem = example_1d(eps);
                let (a, _) = assemble_upwind_1d(&mesh, &problem, eps);
                let (n_layer, _) = partition_1d(&mesh);
                let m = build_preconditioner_1d(&a, n_layer)?;
                let rep = verify_spectrum(&a, &m, eps, &mesh, C_LOWER_1D);
                Ok((rep.gamma_max, rep.bound, rep.applicable))
            })();
            match cell {
                Ok((gamma, bound, applicable)) => {
                    let passed = !applicable || (gamma <= bound && gamma >= -1e-12);
                    report.push(
                        name,
                        passed,
                        format!("gamma_max={gamma:.3e} bound={bound:.3e} applicable={applicable}"),
                    );
                }
                Err(e) => report.push(name, false, format!("setup failed: {e}")),
            }
        }
    }

    // layer-block columns of M^{-1}A are exact unit vectors
    {
        let (eps, n) = (eps_list[0], *n_list.last().unwrap());
        let name = format!("1d unit eigenvalues eps={eps:.0e} N={n}");
        let worst = unit_eigenvalue_defect(eps, n);
        match worst {
            Ok(w) => report.push(name, w <= 1e-12, format!("max defect {w:.3e}")),
            Err(e) => report.push(name, false, format!("setup failed: {e}")),
        }
    }

    // 2D stationary error propagation contracts on a small grid
    for kind in [CaseKind::Parabolic2D, CaseKind::Exponential2D] {
        let eps = 1e-6;
        let n = 32;
        let name = format!("2d splitting radius {} N={n}", kind.as_str());
        let rho = (|| -> blprec::Result<f64> {
            let case = manufactured_case(kind, eps);
            let mesh = mesh_2d(kind, eps, n, 2.5)?;
            let part = partition_regions(&mesh);
            let (a, _) = assemble_upwind_2d(&mesh, &case.problem, eps, &part)?;
            let m = build_preconditioner_2d(&mesh, &case.problem, eps, &part, &a, true)?;
            Ok(error_propagation_radius(&a, &m, 300)?.estimate.abs())
        })();
        match rho {
            Ok(r) => report.push(name, r < 1.0, format!("rho={r:.3e}")),
            Err(e) => report.push(name, false, format!("setup failed: {e}")),
        }
    }

    // Galerkin coarse operator equals the dense triple product
    {
        let name = "semi-coarsening galerkin exactness N=16";
        let worst = (|| -> blprec::Result<f64> {
            let eps = 1e-6;
            let case = parabolic_case(eps);
            let mesh =
                build_shishkin_2d(eps, 16, LayerCase::ParabolicExponential, 0.99, None, 2.5)?;
            let h = build_semicoarsen_hierarchy(&mesh, &case.problem, eps)?;
            let a = &h.levels[0].a;
            let p = h.levels[0].p.as_ref().unwrap();
            let got = &h.levels[1].a;
            let mut scale: f64 = 0.0;
            for r in 0..a.nrows() {
                for (_, v) in a.row(r) {
                    scale = scale.max(v.abs());
                }
            }
            let mut worst: f64 = 0.0;
            for rc in 0..got.nrows() {
                for cc in 0..got.ncols() {
                    let mut want = 0.0;
                    for i in 0..a.nrows() {
                        for k in 0..a.ncols() {
                            want += p.get(i, rc) * a.get(i, k) * p.get(k, cc);
                        }
                    }
                    worst = worst.max((got.get(rc, cc) - want).abs() / scale);
                }
            }
            Ok(worst)
        })();
        match worst {
            Ok(w) => report.push(name, w <= 1e-13, format!("max relative defect {w:.3e}")),
            Err(e) => report.push(name, false, format!("setup failed: {e}")),
        }
    }

    // negative control: zeroing a kept entry must break the structure
    {
        let name = "negative control: corrupted preconditioner detected";
        let (eps, n) = (1e-6, 64);
        let out = (|| -> blprec::Result<f64> {
            let mesh = build_shishkin_1d(eps, n, C_LOWER_1D)?;
            let problem = example_1d(eps);
            let (a, _) = assemble_upwind_1d(&mesh, &problem, eps);
            let (n_layer, _) = partition_1d(&mesh);
            let mut corrupted = a.clone();
            // a kept sub-diagonal entry inside the layer block
            let mut s = seed.wrapping_add(1);
            let k = ((lcg(&mut s) + 0.5) * (n_layer - 1) as f64) as usize;
            corrupted.sub[k.min(n_layer - 2)] = 0.0;
            let m = build_preconditioner_1d(&corrupted, n_layer)?;
            let dim = a.n();
            let mut worst: f64 = 0.0;
            for col in 0..n_layer {
                let mut e = vec![0.0; dim];
                e[col] = 1.0;
                let mut ae = vec![0.0; dim];
                a.matvec(&e, &mut ae);
                let mut z = apply_m_inverse(&m, &ae);
                z[col] -= 1.0;
                worst = worst.max(max_norm(&z));
            }
            Ok(worst)
        })();
        match out {
            Ok(w) => report.push(name, w > 1e-12, format!("corrupted defect {w:.3e}")),
            Err(e) => report.push(name, false, format!("setup failed: {e}")),
        }
    }

    report
}

/// Largest max-norm defect of M^{-1}A e_k - e_k over the layer columns.
pub fn unit_eigenvalue_defect(eps: f64, n: usize) -> blprec::Result<f64> {
    let mesh = build_shishkin_1d(eps, n, C_LOWER_1D)?;
    let problem = example_1d(eps);
    let (a, _) = assemble_upwind_1d(&mesh, &problem, eps);
    let (n_layer, _) = partition_1d(&mesh);
    let m = build_preconditioner_1d(&a, n_layer)?;
    let dim = a.n();
    let mut worst: f64 = 0.0;
    for col in 0..n_layer {
        let mut e = vec![0.0; dim];
        e[col] = 1.0;
        let mut ae = vec![0.0; dim];
        a.matvec(&e, &mut ae);
        let mut z = apply_m_inverse(&m, &ae);
        z[col] -= 1.0;
        worst = worst.max(max_norm(&z));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_e_matches_printf() {
        assert_eq!(fmt_e(4.798369e-2), "4.798369e-02");
        assert_eq!(fmt_e(1.0), "1.000000e+00");
        assert_eq!(fmt_e(-3.5e12), "-3.500000e+12");
        assert_eq!(fmt_e(0.0), "0.000000e+00");
    }

    #[test]
    fn csv_schema_and_shape() {
        let rows = vec![TableRow {
            case: CaseKind::OneD,
            eps: 1e-4,
            n: 128,
            error: 4.798369e-2,
            iters: 3,
            setup_s: 0.0,
            solve_s: 0.0,
            mg_cycles: 0.0,
            converged: true,
            flops_per_iter: 0.0,
        }];
        let csv = render_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "case,eps,N,error,iters,setup_s,solve_s,mg_cycles"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("1d,1.000000e-04,128,4.798369e-02,3,"));
        assert_eq!(row.split(',').count(), 8);
    }

    #[test]
    fn spec_validation_rejects_bad_parameters() {
        let mut spec = ExperimentSpec::with_defaults(CaseKind::OneD);
        assert!(spec.validate().is_ok());
        spec.eps_list = vec![2.0];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::with_defaults(CaseKind::Exponential2D);
        spec.n_list = vec![96];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::with_defaults(CaseKind::Parabolic2D);
        spec.n_list = vec![33];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn direct_reference_solves_small_system() {
        let eps = 1e-6;
        let n = 16;
        let case = manufactured_case(CaseKind::Parabolic2D, eps);
        let mesh = mesh_2d(CaseKind::Parabolic2D, eps, n, 2.5).unwrap();
        let part = partition_regions(&mesh);
        let (a, b) = assemble_upwind_2d(&mesh, &case.problem, eps, &part).unwrap();
        let x = direct_solve_2d(&part, &a, &b, n).unwrap();
        // residual of the direct solve is at rounding level
        let mut ax = vec![0.0; b.len()];
        blprec::linalg::csr_matvec(&a, &x, &mut ax);
        let mut scale: f64 = 0.0;
        for (r, bi) in ax.iter().zip(&b) {
            scale = scale.max((r - bi).abs());
        }
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale <= 1e-8 * bnorm.max(1.0), "residual {scale}");
    }

    #[test]
    fn one_d_cell_matches_published_value() {
        let spec = ExperimentSpec {
            eps_list: vec![1e-8],
            n_list: vec![128],
            ..ExperimentSpec::with_defaults(CaseKind::OneD)
        };
        let rows = run_table(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].converged);
        assert!(
            (rows[0].error - 4.798e-2).abs() <= 5e-5,
            "{}",
            rows[0].error
        );
        assert_eq!(rows[0].iters, 1);
    }

    #[test]
    fn empty_verification_report_passes() {
        let report = run_verification(&[], &[], 0);
        assert!(report.checks.is_empty());
        assert!(report.all_passed());
    }

    #[test]
    fn verification_suite_passes_on_small_grid() {
        let report = run_verification(&[1e-6], &[128], 7);
        assert!(!report.checks.is_empty());
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
