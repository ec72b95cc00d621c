//! Shishkin mesh construction in 1D and 2D, and the region partitions
//! induced by the mesh transition points.
//!
//! A Shishkin mesh on [0, 1] places a transition point tau and divides
//! each of [0, tau] and [tau, 1] into N/2 uniform intervals, so the layer
//! half is fine and the interior half is coarse.  The 2D meshes are
//! tensor products of two such 1D meshes, with the transition-point
//! formula in the y-direction depending on the layer structure of the
//! problem.

use crate::error::Error;
use crate::Result;

/// Which pair of boundary layers the y-direction mesh resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerCase {
    /// Exponential layer at x = 0, parabolic (characteristic) layer at
    /// y = 0: tau_y uses sqrt(eps).
    ParabolicExponential,
    /// Exponential layers at both x = 0 and y = 0.
    TwoExponential,
}

/// Piecewise-uniform 1D mesh with N/2 intervals on each side of the
/// transition point.
#[derive(Debug, Clone)]
pub struct Mesh1D {
    points: Vec<f64>,
    transition_index: usize,
    tau: f64,
}

impl Mesh1D {
    /// Mesh coordinates x_0 = 0 .. x_N = 1.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of mesh intervals N.
    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    /// Index i with x_i = tau (equals N/2).
    pub fn transition_index(&self) -> usize {
        self.transition_index
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Interval width h_i = x_i - x_{i-1}, 1 <= i <= N.
    pub fn h(&self, i: usize) -> f64 {
        self.points[i] - self.points[i - 1]
    }

    /// Averaged width (h_i + h_{i+1}) / 2 at interior point i.
    pub fn h_bar(&self, i: usize) -> f64 {
        0.5 * (self.h(i) + self.h(i + 1))
    }

    /// Mesh with the same transition point but `factor` times as many
    /// intervals per side; used for benchmark reference solves.
    pub fn refine(&self, factor: usize) -> Mesh1D {
        assert!(factor >= 1);
        let half = self.transition_index * factor;
        let mut points = Vec::with_capacity(2 * half + 1);
        for i in 0..=half {
            points.push(self.tau * i as f64 / half as f64);
        }
        for i in 1..=half {
            points.push(self.tau + (1.0 - self.tau) * i as f64 / half as f64);
        }
        let n = points.len() - 1;
        points[n] = 1.0;
        Mesh1D {
            points,
            transition_index: half,
            tau: self.tau,
        }
    }

    /// Mesh with every other point dropped (N halved, same tau).
    pub fn coarsen(&self) -> Result<Mesh1D> {
        let n = self.n();
        if !n.is_multiple_of(4) || n < 8 {
            return Err(Error::InvalidInput(format!(
                "cannot coarsen a mesh with N = {n}"
            )));
        }
        let points: Vec<f64> = self.points.iter().copied().step_by(2).collect();
        Ok(Mesh1D {
            points,
            transition_index: self.transition_index / 2,
            tau: self.tau,
        })
    }
}

fn check_common(eps: f64, n: usize) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in (0, 1], got {eps}"
        )));
    }
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "N must be even and at least 4, got {n}"
        )));
    }
    Ok(())
}

/// Piecewise-uniform mesh with an explicit transition point: N/2
/// intervals on [0, tau] and N/2 on [tau, 1].
pub fn mesh_from_tau(tau: f64, n: usize) -> Mesh1D {
    let half = n / 2;
    let mut points = Vec::with_capacity(n + 1);
    for i in 0..=half {
        points.push(tau * i as f64 / half as f64);
    }
    for i in 1..=half {
        points.push(tau + (1.0 - tau) * i as f64 / half as f64);
    }
    points[n] = 1.0;
    Mesh1D {
        points,
        transition_index: half,
        tau,
    }
}

/// Build the 1D Shishkin mesh with transition point
/// tau = min(1/2, 2 eps ln(N) / c_lower).
pub fn build_shishkin_1d(eps: f64, n: usize, c_lower: f64) -> Result<Mesh1D> {
    check_common(eps, n)?;
    if c_lower <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "c_lower must be positive, got {c_lower}"
        )));
    }
    let tau = (0.5_f64).min(2.0 * eps * (n as f64).ln() / c_lower);
    Ok(mesh_from_tau(tau, n))
}

/// Tensor-product 2D Shishkin mesh.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    pub x_mesh: Mesh1D,
    pub y_mesh: Mesh1D,
    pub layer_case: LayerCase,
}

impl Mesh2D {
    pub fn n(&self) -> usize {
        self.x_mesh.n()
    }

    /// Coarsened mesh for full-coarsening rediscretization.
    pub fn coarsen(&self) -> Result<Mesh2D> {
        Ok(Mesh2D {
            x_mesh: self.x_mesh.coarsen()?,
            y_mesh: self.y_mesh.coarsen()?,
            layer_case: self.layer_case,
        })
    }
}

/// Build the tensor-product Shishkin mesh for the requested layer case.
///
/// ParabolicExponential: tau_x = min(1/2, sigma eps ln N / c1_lower),
/// tau_y = min(1/2, sigma sqrt(eps) ln N).  TwoExponential: both axes use
/// the exponential formula with their own convection lower bound.
/// `c2_lower` is only consulted for [`LayerCase::TwoExponential`].
pub fn build_shishkin_2d(
    eps: f64,
    n: usize,
    layer_case: LayerCase,
    c1_lower: f64,
    c2_lower: Option<f64>,
    sigma: f64,
) -> Result<Mesh2D> {
    check_common(eps, n)?;
    if c1_lower <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "c1_lower must be positive, got {c1_lower}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let ln_n = (n as f64).ln();
    let tau_x = (0.5_f64).min(sigma * eps * ln_n / c1_lower);
    let tau_y = match layer_case {
        LayerCase::ParabolicExponential => (0.5_f64).min(sigma * eps.sqrt() * ln_n),
        LayerCase::TwoExponential => {
            let c2 = c2_lower.ok_or_else(|| {
                Error::InvalidInput("c2_lower required for the two-exponential case".into())
            })?;
            if c2 <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "c2_lower must be positive, got {c2}"
                )));
            }
            (0.5_f64).min(sigma * eps * ln_n / c2)
        }
    };
    Ok(Mesh2D {
        x_mesh: mesh_from_tau(tau_x, n),
        y_mesh: mesh_from_tau(tau_y, n),
        layer_case,
    })
}

/// 1D partition sizes: layer unknowns N_L (transition point included) and
/// interior unknowns N_I, over the N-1 interior meshpoints.
pub fn partition_1d(mesh: &Mesh1D) -> (usize, usize) {
    let n_layer = mesh.transition_index();
    (n_layer, mesh.n() - 1 - n_layer)
}

/// Index sets mapping the (N-1)^2 interior unknowns of a 2D mesh to the
/// corner, edge-layer, and interior regions.
///
/// Each list holds (i, j) mesh indices (1-based, Dirichlet boundary
/// removed) ordered lexicographically from the lower-left corner of the
/// region to its upper-right corner (y-major).
#[derive(Debug, Clone)]
pub struct RegionPartition {
    pub corner: Vec<(usize, usize)>,
    pub edge_x: Vec<(usize, usize)>,
    pub edge_y: Vec<(usize, usize)>,
    pub interior: Vec<(usize, usize)>,
    n: usize,
    global_of_node: Vec<usize>,
}

/// Region labels in block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Corner,
    EdgeX,
    EdgeY,
    Interior,
}

impl RegionPartition {
    /// Total number of unknowns (N-1)^2.
    pub fn n_unknowns(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Global unknown index of meshpoint (i, j), 1 <= i, j <= N-1, under
    /// the region-block ordering C, X, Y, I.
    pub fn global_index(&self, i: usize, j: usize) -> usize {
        self.global_of_node[(j - 1) * (self.n - 1) + (i - 1)]
    }

    /// Block offset of each region in the global ordering.
    pub fn offset(&self, region: Region) -> usize {
        match region {
            Region::Corner => 0,
            Region::EdgeX => self.corner.len(),
            Region::EdgeY => self.corner.len() + self.edge_x.len(),
            Region::Interior => self.corner.len() + self.edge_x.len() + self.edge_y.len(),
        }
    }

    pub fn len(&self, region: Region) -> usize {
        self.nodes(region).len()
    }

    pub fn nodes(&self, region: Region) -> &[(usize, usize)] {
        match region {
            Region::Corner => &self.corner,
            Region::EdgeX => &self.edge_x,
            Region::EdgeY => &self.edge_y,
            Region::Interior => &self.interior,
        }
    }

    /// Region containing global unknown `g`.
    pub fn region_of(&self, g: usize) -> Region {
        if g < self.offset(Region::EdgeX) {
            Region::Corner
        } else if g < self.offset(Region::EdgeY) {
            Region::EdgeX
        } else if g < self.offset(Region::Interior) {
            Region::EdgeY
        } else {
            Region::Interior
        }
    }
}

/// Partition the interior meshpoints of a 2D mesh into corner, edge, and
/// interior index sets by comparing coordinates with the transition
/// points (<= tau goes to the layer side).
pub fn partition_regions(mesh: &Mesh2D) -> RegionPartition {
    let n = mesh.n();
    let tx = mesh.x_mesh.transition_index();
    let ty = mesh.y_mesh.transition_index();
    let mut corner = Vec::new();
    let mut edge_x = Vec::new();
    let mut edge_y = Vec::new();
    let mut interior = Vec::new();
    for j in 1..n {
        for i in 1..n {
            match (i <= tx, j <= ty) {
                (true, true) => corner.push((i, j)),
                (true, false) => edge_x.push((i, j)),
                (false, true) => edge_y.push((i, j)),
                (false, false) => interior.push((i, j)),
            }
        }
    }
    let mut global_of_node = vec![usize::MAX; (n - 1) * (n - 1)];
    let mut g = 0;
    for list in [&corner, &edge_x, &edge_y, &interior] {
        for &(i, j) in list.iter() {
            global_of_node[(j - 1) * (n - 1) + (i - 1)] = g;
            g += 1;
        }
    }
    RegionPartition {
        corner,
        edge_x,
        edge_y,
        interior,
        n,
        global_of_node,
    }
}
