//! The 1D boundary-layer block preconditioner: the system matrix with
//! its interior block replaced by that block's upper-triangular part.
//!
//! Under the layer/interior partition, the preconditioner keeps the full
//! layer block A_LL, both coupling blocks, and approximates A_II by its
//! upper triangular part.  Since A is tridiagonal this amounts to zeroing
//! the sub-diagonal entries of the interior rows, so the preconditioner
//! is itself tridiagonal and one Thomas solve applies its inverse.

use crate::discretize::TridiagonalMatrix;
use crate::linalg::{
    power_iteration, thomas_factor, thomas_solve, FactoredTridiagonal, PowerIteration,
};
use crate::mesh::Mesh1D;
use crate::Result;

/// Factored 1D boundary-layer preconditioner.
pub struct Preconditioner1D {
    factored: FactoredTridiagonal,
    modified: TridiagonalMatrix,
    n_layer: usize,
}

impl Preconditioner1D {
    pub fn n(&self) -> usize {
        self.modified.n()
    }

    pub fn n_layer(&self) -> usize {
        self.n_layer
    }

    /// The patched tridiagonal M itself (for structural tests).
    pub fn matrix(&self) -> &TridiagonalMatrix {
        &self.modified
    }
}

/// Build M from the assembled upwind matrix: sub-diagonal entries of rows
/// n_layer+2 .. n are zeroed (row n_layer+1 keeps its sub-diagonal entry,
/// which is the single nonzero of A_IL).  Rows here are 1-based.
pub fn build_preconditioner_1d(a: &TridiagonalMatrix, n_layer: usize) -> Result<Preconditioner1D> {
    let n = a.n();
    assert!(n_layer >= 1 && n_layer < n, "need 1 <= n_layer < n");
    let mut modified = a.clone();
    // sub[k] holds entry (k+2, k+1) in 1-based terms
    for k in n_layer..n - 1 {
        modified.sub[k] = 0.0;
    }
    let factored = thomas_factor(&modified)?;
    Ok(Preconditioner1D {
        factored,
        modified,
        n_layer,
    })
}

/// Solve M z = r.
pub fn apply_m_inverse(p: &Preconditioner1D, r: &[f64]) -> Vec<f64> {
    thomas_solve(&p.factored, r)
}

/// Numerical verification of the spectral bound for the preconditioned
/// operator: the nonunit eigenvalues of M^{-1}A lie in [1 - 8 eps N /
/// (c_lower alpha), 1] with alpha = 2 (1 - 2 eps ln N / c_lower).
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Power-iteration estimate of rho(I - M^{-1}A).
    pub gamma_max: f64,
    /// 8 eps N / (c_lower * alpha).
    pub bound: f64,
    /// Empirical alpha = 2 (1 - 2 eps ln N / c_lower).
    pub alpha: f64,
    /// Largest alpha admitted by the actual mesh: N * min interior h_i.
    pub alpha_mesh: f64,
    /// Whether eps * N <= c_lower * alpha / 8 holds; the lower bound in
    /// the bound is only informative in that regime.
    pub applicable: bool,
    pub power: PowerIteration,
}

impl SpectrumReport {
    pub fn bound_holds(&self) -> bool {
        self.applicable && self.gamma_max <= self.bound && self.gamma_max >= -1e-12
    }
}

/// Estimate rho(I - M^{-1}A) by power iteration and compare with the
/// theoretical bound.
pub fn verify_spectrum(
    a: &TridiagonalMatrix,
    p: &Preconditioner1D,
    eps: f64,
    mesh: &Mesh1D,
    c_lower: f64,
) -> SpectrumReport {
    let n = mesh.n() as f64;
    let alpha = 2.0 * (1.0 - 2.0 * eps * n.ln() / c_lower);
    let bound = 8.0 * eps * n / (c_lower * alpha);
    let applicable = eps * n <= c_lower * alpha / 8.0;
    let alpha_mesh = (p.n_layer + 1..=mesh.n())
        .map(|i| mesh.h(i))
        .fold(f64::INFINITY, f64::min)
        * n;

    let dim = a.n();
    let mut ax = vec![0.0; dim];
    let power = power_iteration(
        |x, y| {
            a.matvec(x, &mut ax);
            let z = apply_m_inverse(p, &ax);
            for i in 0..dim {
                y[i] = x[i] - z[i];
            }
        },
        dim,
        5000,
        1e-10,
    );
    SpectrumReport {
        gamma_max: power.estimate,
        bound,
        alpha,
        alpha_mesh,
        applicable,
        power,
    }
}
