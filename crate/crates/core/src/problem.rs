//! Benchmark problem definitions: coefficient functions, forcing terms,
//! and manufactured solutions.
//!
//! The 2D forcing terms are hand-derived closed forms of the continuous
//! operator applied to the manufactured solution, with the layer
//! exponentials grouped so that the 1/eps-sized terms cancel analytically
//! rather than numerically.

type Fn1 = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

use crate::mesh::LayerCase;

/// Coefficients of -eps u'' - c(x) u' + r(x) u = f on (0,1).
pub struct Problem1D {
    c: Fn1,
    r: Fn1,
    f: Fn1,
    pub c_lower: f64,
}

impl Problem1D {
    pub fn c(&self, x: f64) -> f64 {
        (self.c)(x)
    }
    pub fn r(&self, x: f64) -> f64 {
        (self.r)(x)
    }
    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// Coefficients of -eps Lap(u) - c1 u_x - c2 u_y + r u = f on (0,1)^2.
pub struct Problem2D {
    c1: Fn2,
    c2: Fn2,
    r: Fn2,
    f: Fn2,
    pub c1_lower: f64,
    pub c2_lower: Option<f64>,
    pub layer_case: LayerCase,
}

impl Problem2D {
    pub fn c1(&self, x: f64, y: f64) -> f64 {
        (self.c1)(x, y)
    }
    pub fn c2(&self, x: f64, y: f64) -> f64 {
        (self.c2)(x, y)
    }
    pub fn r(&self, x: f64, y: f64) -> f64 {
        (self.r)(x, y)
    }
    pub fn f(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

/// A 2D problem paired with the exact solution its forcing was derived
/// from.
pub struct ManufacturedCase {
    pub problem: Problem2D,
    u_exact: Fn2,
    pub eps: f64,
}

impl ManufacturedCase {
    pub fn u_exact(&self, x: f64, y: f64) -> f64 {
        (self.u_exact)(x, y)
    }
}

/// The 1D benchmark -eps u'' - (2 + sin(5x)) u' + u = 4 e^{-x}.
///
/// c_lower = 0.99 sits strictly below the infimum of 2 + sin(5x).
pub fn example_1d(eps: f64) -> Problem1D {
    assert!(eps > 0.0 && eps <= 1.0, "eps must lie in (0, 1]");
    Problem1D {
        c: Box::new(|x| 2.0 + (5.0 * x).sin()),
        r: Box::new(|_| 1.0),
        f: Box::new(|x| 4.0 * (-x).exp()),
        // strict lower bound: min c = 1, taken just below
        c_lower: 0.99,
    }
}

/// Manufactured case with an exponential layer at x = 0 and a parabolic
/// layer at y = 0, for the operator -eps Lap(u) - u_x + u.
///
/// u(x,y) = (cos(pi x / 2) - (e^{-x/eps} - e^{-1/eps}) / (1 - e^{-1/eps}))
///          * ((1 - e^{-y/sqrt(eps)}) / (1 - e^{-1/sqrt(eps)}) - y^{5/2}).
pub fn parabolic_case(eps: f64) -> ManufacturedCase {
    assert!(eps > 0.0 && eps <= 1.0, "eps must lie in (0, 1]");
    let half_pi = std::f64::consts::FRAC_PI_2;
    let d_x = 1.0 - (-1.0 / eps).exp();
    let e1 = (-1.0 / eps).exp();
    let sqrt_eps = eps.sqrt();
    let d_y = 1.0 - (-1.0 / sqrt_eps).exp();

    let xf = move |x: f64| (half_pi * x).cos() - ((-x / eps).exp() - e1) / d_x;
    let yf = move |y: f64| (1.0 - (-y / sqrt_eps).exp()) / d_y - y.powf(2.5);
    // -eps X'' - X': the layer exponentials cancel exactly
    let ax =
        move |x: f64| eps * half_pi * half_pi * (half_pi * x).cos() + half_pi * (half_pi * x).sin();
    // -eps Y''
    let by = move |y: f64| (-y / sqrt_eps).exp() / d_y + 3.75 * eps * y.sqrt();

    let u = move |x: f64, y: f64| xf(x) * yf(y);
    let f = move |x: f64, y: f64| ax(x) * yf(y) + xf(x) * by(y) + xf(x) * yf(y);

    ManufacturedCase {
        problem: Problem2D {
            c1: Box::new(|_, _| 1.0),
            c2: Box::new(|_, _| 0.0),
            r: Box::new(|_, _| 1.0),
            f: Box::new(f),
            c1_lower: 1.0,
            c2_lower: None,
            layer_case: LayerCase::ParabolicExponential,
        },
        u_exact: Box::new(u),
        eps,
    }
}

/// Manufactured case with exponential layers at x = 0 and y = 0, for the
/// operator -eps Lap(u) - 2 u_x - 3 u_y + u.
///
/// u(x,y) = cos(pi x / 2) (1 - e^{-2x/eps}) (1 - y)^3 (1 - e^{-3y/eps}).
pub fn exponential_case(eps: f64) -> ManufacturedCase {
    assert!(eps > 0.0 && eps <= 1.0, "eps must lie in (0, 1]");
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;

    let pf = move |x: f64| (half_pi * x).cos() * (1.0 - (-2.0 * x / eps).exp());
    let qf = move |y: f64| (1.0 - y).powi(3) * (1.0 - (-3.0 * y / eps).exp());
    // -eps P'' - 2 P' with the layer second derivative cancelled against
    // the convection term
    let ax = move |x: f64| {
        let e = (-2.0 * x / eps).exp();
        let (s, c) = (half_pi * x).sin_cos();
        (1.0 - e) * (eps * half_pi * half_pi * c + pi * s) + 2.0 * pi * s * e
    };
    // -eps Q'' - 3 Q', same cancellation in y
    let by = move |y: f64| {
        let f = (-3.0 * y / eps).exp();
        let w = 1.0 - y;
        (1.0 - f) * (9.0 * w * w - 6.0 * eps * w) + 18.0 * w * w * f
    };

    let u = move |x: f64, y: f64| pf(x) * qf(y);
    let f = move |x: f64, y: f64| qf(y) * ax(x) + pf(x) * by(y) + pf(x) * qf(y);

    ManufacturedCase {
        problem: Problem2D {
            c1: Box::new(|_, _| 2.0),
            c2: Box::new(|_, _| 3.0),
            r: Box::new(|_, _| 1.0),
            f: Box::new(f),
            c1_lower: 2.0,
            c2_lower: Some(3.0),
            layer_case: LayerCase::TwoExponential,
        },
        u_exact: Box::new(u),
        eps,
    }
}
