//! Core linear-algebra kernels: Thomas solves for tridiagonal systems,
//! CSR matrix-vector products, norms, dense and banded LU oracles, power
//! iteration, and a symmetric-tridiagonal eigenvalue solver used for
//! spectral verification.

use crate::discretize::{CsrMatrix, TridiagonalMatrix};
use crate::error::Error;
use crate::Result;

/// LU factors of a tridiagonal matrix, unit lower diagonal convention.
///
/// `l[i]` is the multiplier eliminating row `i+1`, `u_diag`/`u_super`
/// hold the upper factor.
#[derive(Debug, Clone)]
pub struct FactoredTridiagonal {
    l: Vec<f64>,
    u_diag: Vec<f64>,
    u_super: Vec<f64>,
}

impl FactoredTridiagonal {
    pub fn n(&self) -> usize {
        self.u_diag.len()
    }

    /// Diagonal of the upper factor U.
    pub fn u_diagonal(&self) -> &[f64] {
        &self.u_diag
    }

    pub fn u_superdiagonal(&self) -> &[f64] {
        &self.u_super
    }
}

/// Factor a tridiagonal matrix without pivoting (Thomas algorithm).
///
/// The inputs assembled in this crate are diagonally dominant, so the
/// factorization cannot break down; a zero or non-finite pivot is still
/// rejected.
pub fn thomas_factor(t: &TridiagonalMatrix) -> Result<FactoredTridiagonal> {
    let n = t.n();
    let mut l = vec![0.0; n.saturating_sub(1)];
    let mut u_diag = vec![0.0; n];
    let mut u_super = vec![0.0; n.saturating_sub(1)];

    u_diag[0] = t.diag[0];
    for i in 0..n - 1 {
        let piv = u_diag[i];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Factorization { index: i });
        }
        u_super[i] = t.sup[i];
        l[i] = t.sub[i] / piv;
        u_diag[i + 1] = t.diag[i + 1] - l[i] * u_super[i];
    }
    let last = u_diag[n - 1];
    if last == 0.0 || !last.is_finite() {
        return Err(Error::Factorization { index: n - 1 });
    }
    Ok(FactoredTridiagonal { l, u_diag, u_super })
}

/// Solve `t x = rhs` given factors from [`thomas_factor`].
pub fn thomas_solve(f: &FactoredTridiagonal, rhs: &[f64]) -> Vec<f64> {
    let n = f.n();
    assert_eq!(rhs.len(), n, "rhs length must match matrix order");
    let mut x = rhs.to_vec();
    for i in 1..n {
        x[i] -= f.l[i - 1] * x[i - 1];
    }
    x[n - 1] /= f.u_diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (x[i] - f.u_super[i] * x[i + 1]) / f.u_diag[i];
    }
    x
}

/// Sparse matrix-vector product `y = A x`.
pub fn csr_matvec(a: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), a.ncols(), "x length must match column count");
    assert_eq!(y.len(), a.nrows(), "y length must match row count");
    for (row, slot) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (col, val) in a.row(row) {
            acc += val * x[col];
        }
        *slot = acc;
    }
}

/// Discrete maximum norm.
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Euclidean norm.
pub fn two_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major dense square matrix, used for small oracle computations.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn from_tridiagonal(t: &TridiagonalMatrix) -> Self {
        let n = t.n();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.sup[i];
                m[(i + 1, i)] = t.sub[i];
            }
        }
        m
    }

    pub fn from_csr(a: &CsrMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let mut m = Self::zeros(a.nrows());
        for row in 0..a.nrows() {
            for (col, val) in a.row(row) {
                m[(row, col)] = val;
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, slot) in y.iter_mut().enumerate() {
            *slot = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Dense LU factorization with partial pivoting.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        Self::factor_impl(a, true)
    }

    /// Factor without pivoting, exposing U's diagonal.  Only sensible for
    /// diagonally dominant inputs.
    pub fn factor_no_pivot(a: &DenseMatrix) -> Result<Self> {
        Self::factor_impl(a, false)
    }

    fn factor_impl(a: &DenseMatrix, pivot: bool) -> Result<Self> {
        let n = a.n;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            if pivot {
                let (mut imax, mut vmax) = (k, lu[k * n + k].abs());
                for i in k + 1..n {
                    let v = lu[i * n + k].abs();
                    if v > vmax {
                        imax = i;
                        vmax = v;
                    }
                }
                if imax != k {
                    perm.swap(k, imax);
                    for j in 0..n {
                        lu.swap(k * n + j, imax * n + j);
                    }
                }
            }
            let piv = lu[k * n + k];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Singular { index: k });
            }
            for i in k + 1..n {
                let m = lu[i * n + k] / piv;
                lu[i * n + k] = m;
                for j in k + 1..n {
                    lu[i * n + j] -= m * lu[k * n + j];
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Diagonal of U; meaningful for the no-pivot factorization.
    pub fn u_diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.lu[i * self.n + i]).collect()
    }
}

/// Convenience one-shot dense solve with partial pivoting.
pub fn dense_lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(DenseLu::factor(a)?.solve(b))
}

/// Banded LU factorization without pivoting, for diagonally dominant
/// systems.  Used as a direct reference solver for the 2D discretizations
/// (half-bandwidth N-1) at moderate N; memory grows like n * bandwidth.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    // band[i * width + (j - i + kl)] stores entry (i, j)
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor_csr(a: &CsrMatrix, half_bandwidth: usize) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let (kl, ku) = (half_bandwidth, half_bandwidth);
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for row in 0..n {
            for (col, val) in a.row(row) {
                let off = col as isize - row as isize;
                if off < -(kl as isize) || off > ku as isize {
                    return Err(Error::Structure(format!(
                        "entry ({row}, {col}) outside bandwidth {half_bandwidth}"
                    )));
                }
                band[row * width + (off + kl as isize) as usize] = val;
            }
        }
        // in-place banded elimination
        for k in 0..n {
            let piv = band[k * width + kl];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Factorization { index: k });
            }
            let imax = (k + kl).min(n - 1);
            for i in k + 1..=imax {
                let idx_ik = i * width + (k + kl - i);
                let m = band[idx_ik] / piv;
                band[idx_ik] = m;
                if m != 0.0 {
                    let jmax = (k + ku).min(n - 1);
                    for j in k + 1..=jmax {
                        let akj = band[k * width + (j - k + kl)];
                        band[i * width + (j + kl - i)] -= m * akj;
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ku, band })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let width = kl + ku + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let jmin = i.saturating_sub(kl);
            for j in jmin..i {
                x[i] -= self.band[i * width + (j + kl - i)] * x[j];
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + ku).min(n - 1);
            for j in i + 1..=jmax {
                x[i] -= self.band[i * width + (j - i + kl)] * x[j];
            }
            x[i] /= self.band[i * width + kl];
        }
        x
    }
}

/// Outcome of a power iteration.
#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Estimate the dominant eigenvalue of a linear operator by power
/// iteration with Rayleigh-quotient stagnation test.
///
/// Seeded with the constant-1 vector so results are deterministic.
pub fn power_iteration<F>(mut apply: F, n: usize, max_iters: usize, tol: f64) -> PowerIteration
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut history = Vec::new();
    let mut prev = f64::NAN;
    for it in 1..=max_iters {
        apply(&v, &mut w);
        let vv = dot(&v, &v);
        let rayleigh = dot(&v, &w) / vv;
        history.push(rayleigh);
        let nw = two_norm(&w);
        if nw == 0.0 {
            // operator annihilated the iterate; dominant eigenvalue is 0
            return PowerIteration {
                estimate: 0.0,
                iterations: it,
                converged: true,
                history,
            };
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if prev.is_finite()
            && (rayleigh - prev).abs() <= tol * rayleigh.abs().max(f64::MIN_POSITIVE)
        {
            return PowerIteration {
                estimate: rayleigh,
                iterations: it,
                converged: true,
                history,
            };
        }
        prev = rayleigh;
    }
    PowerIteration {
        estimate: prev,
        iterations: max_iters,
        converged: false,
        history,
    }
}

/// All eigenvalues of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off`, by Sturm-sequence bisection.
///
/// Used to verify spectra of preconditioned operators through the
/// Jacobi-similarity route, independent of the solver kernels.
pub fn symtri_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len(), n.saturating_sub(1));
    if n == 0 {
        return Vec::new();
    }
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let span = (hi - lo).max(1e-300);
    let count_below = |x: f64| -> usize {
        // number of eigenvalues < x via Sturm sequence
        let mut count = 0;
        let mut d = diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let denom = if d == 0.0 {
                1e-300_f64.copysign(1.0)
            } else {
                d
            };
            d = diag[i] - x - off[i - 1] * off[i - 1] / denom;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut eigs = Vec::with_capacity(n);
    for k in 0..n {
        let (mut a, mut b) = (lo - 1e-12 * span, hi + 1e-12 * span);
        // bisect for the (k+1)-th smallest eigenvalue
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if count_below(mid) <= k {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-14 * span {
                break;
            }
        }
        eigs.push(0.5 * (a + b));
    }
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::TridiagonalMatrix;

    fn tri(sub: f64, diag: f64, sup: f64, n: usize) -> TridiagonalMatrix {
        TridiagonalMatrix {
            sub: vec![sub; n - 1],
            diag: vec![diag; n],
            sup: vec![sup; n - 1],
        }
    }

    #[test]
    fn thomas_identity() {
        let t = tri(0.0, 1.0, 0.0, 5);
        let f = thomas_factor(&t).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(thomas_solve(&f, &b), b);
    }

    #[test]
    fn thomas_discrete_laplacian_order3() {
        // tri(-1, 2, -1), rhs = e1: x = (3/4, 1/2, 1/4), checked against
        // the dense LU oracle
        let t = tri(-1.0, 2.0, -1.0, 3);
        let f = thomas_factor(&t).unwrap();
        let x = thomas_solve(&f, &[1.0, 0.0, 0.0]);
        let oracle = dense_lu_solve(&DenseMatrix::from_tridiagonal(&t), &[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in x.iter().zip([0.75, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn lcg(seed: &mut u64) -> f64 {
        // deterministic uniform in [0, 1)
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn random_dd_tridiagonal(n: usize, seed: &mut u64) -> TridiagonalMatrix {
        let sub: Vec<f64> = (0..n - 1).map(|_| lcg(seed) - 0.5).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| lcg(seed) - 0.5).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let row = if i > 0 { sub[i - 1].abs() } else { 0.0 }
                    + if i < n - 1 { sup[i].abs() } else { 0.0 };
                row + 0.1 + lcg(seed)
            })
            .collect();
        TridiagonalMatrix { sub, diag, sup }
    }

    #[test]
    fn thomas_residual_random_dd() {
        let mut seed = 42;
        let t = random_dd_tridiagonal(100, &mut seed);
        let f = thomas_factor(&t).unwrap();
        let rhs: Vec<f64> = (0..100).map(|_| lcg(&mut seed) - 0.5).collect();
        let x = thomas_solve(&f, &rhs);
        let mut r = rhs.clone();
        for i in 0..100 {
            let mut ax = t.diag[i] * x[i];
            if i > 0 {
                ax += t.sub[i - 1] * x[i - 1];
            }
            if i < 99 {
                ax += t.sup[i] * x[i + 1];
            }
            r[i] -= ax;
        }
        assert!(max_norm(&r) <= 1e-12 * max_norm(&rhs));
    }

    #[test]
    fn thomas_agrees_with_dense_on_random_systems() {
        let mut seed = 7;
        for trial in 0..50 {
            let n = 5 + (trial * 4) % 196;
            let t = random_dd_tridiagonal(n, &mut seed);
            let rhs: Vec<f64> = (0..n).map(|_| lcg(&mut seed) - 0.5).collect();
            let x = thomas_solve(&thomas_factor(&t).unwrap(), &rhs);
            let y = dense_lu_solve(&DenseMatrix::from_tridiagonal(&t), &rhs).unwrap();
            let scale = max_norm(&y).max(1.0);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() <= 1e-11 * scale);
            }
        }
    }

    #[test]
    fn diag_dom_factor_satisfies_u_bound() {
        // u_{i,i} >= |u_{i,i+1}| for diagonally dominant tridiagonals with
        // positive diagonal
        let mut seed = 99;
        for _ in 0..20 {
            let t = random_dd_tridiagonal(60, &mut seed);
            let f = thomas_factor(&t).unwrap();
            for i in 0..59 {
                assert!(f.u_diagonal()[i] >= f.u_superdiagonal()[i].abs());
            }
        }
    }

    #[test]
    fn dense_lu_2x2_and_identity() {
        let mut a = DenseMatrix::zeros(2);
        a[(0, 0)] = 2.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(1, 1)] = 2.0;
        let x = dense_lu_solve(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);

        let id = DenseMatrix::identity(4);
        let b = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(dense_lu_solve(&id, &b).unwrap(), b);
    }

    #[test]
    fn lu_nn_inverse_relation() {
        // (A^{-1})_{n,n} * u_{n,n} = 1 for diagonally dominant tridiagonal,
        // no pivoting
        let mut seed = 5;
        let n = 40;
        let t = random_dd_tridiagonal(n, &mut seed);
        let a = DenseMatrix::from_tridiagonal(&t);
        let lu = DenseLu::factor_no_pivot(&a).unwrap();
        let mut en = vec![0.0; n];
        en[n - 1] = 1.0;
        let col = lu.solve(&en);
        let unn = lu.u_diagonal()[n - 1];
        assert!((col[n - 1] * unn - 1.0).abs() < 1e-13);
    }

    #[test]
    fn power_iteration_scaled_identity() {
        let r = power_iteration(
            |x, y| {
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = 2.0 * xi;
                }
            },
            6,
            100,
            1e-12,
        );
        assert!(r.converged);
        assert!((r.estimate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = [1.0, 0.5, 0.1];
        let r = power_iteration(
            |x, y| {
                for i in 0..3 {
                    y[i] = d[i] * x[i];
                }
            },
            3,
            500,
            1e-12,
        );
        assert!(r.converged);
        assert!((r.estimate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symtri_eigenvalues_laplacian() {
        // eigenvalues of tri(-1, 2, -1) of order n are 2 - 2cos(k pi/(n+1))
        let n = 12;
        let eigs = symtri_eigenvalues(&vec![2.0; n], &vec![-1.0; n - 1]);
        for (k, ev) in eigs.iter().enumerate() {
            let exact =
                2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((ev - exact).abs() < 1e-10, "k={k}: {ev} vs {exact}");
        }
    }

    #[test]
    fn banded_lu_matches_dense() {
        // small 5-point system via its dense image
        use crate::discretize::CsrMatrix;
        let n = 9; // 3x3 grid laplacian
        let mut rows = Vec::new();
        for r in 0..n {
            let (i, j) = (r % 3, r / 3);
            let mut entries = Vec::new();
            if j > 0 {
                entries.push((r - 3, -1.0));
            }
            if i > 0 {
                entries.push((r - 1, -1.0));
            }
            entries.push((r, 4.0));
            if i < 2 {
                entries.push((r + 1, -1.0));
            }
            if j < 2 {
                entries.push((r + 3, -1.0));
            }
            rows.push(entries);
        }
        let a = CsrMatrix::from_rows(n, n, &rows);
        let lu = BandedLu::factor_csr(&a, 3).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = lu.solve(&b);
        let y = dense_lu_solve(&DenseMatrix::from_csr(&a), &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
