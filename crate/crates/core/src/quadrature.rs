//! Weighted grids and quadrature for the half ball B_r^+ and the half sphere
//! S_r^+ with the degenerate measure t^b.
//!
//! Points are written z = rho (sin psi omega, cos psi) with omega in S^{N-1},
//! so t = rho cos psi and the flat boundary {t = 0} is psi = pi/2. Samples are
//! taken to be averages over omega; the omega integral contributes |S^{N-1}|.

use std::f64::consts::FRAC_PI_2;

use crate::error::{LabError, Result};
use crate::params::{sphere_area, WeightParams};
use crate::tridiag::SymTridiag;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss rule for the weight x^beta on [0, 1] (Golub-Welsch on the Jacobi
/// recurrence with parameters (0, beta)).
pub fn gauss_jacobi_unit(n: usize, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let a = 0.0_f64;
    let s = a + beta;
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            if k == 0.0 {
                (beta - a) / (s + 2.0)
            } else {
                (beta * beta - a * a) / ((2.0 * k + s) * (2.0 * k + s + 2.0))
            }
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            let num = 4.0 * k * (k + a) * (k + beta) * (k + s);
            let den = (2.0 * k + s).powi(2) * (2.0 * k + s + 1.0) * (2.0 * k + s - 1.0);
            (num / den).sqrt()
        })
        .collect();
    let t = SymTridiag::new(diag, off).expect("finite Jacobi recurrence");
    let mu0 = 2f64.powf(beta + 1.0) / (beta + 1.0);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let y = t.eigenvalue(k);
        let v = t.eigenvector(y);
        nodes.push((1.0 + y) / 2.0);
        weights.push(mu0 * v[0] * v[0] / 2f64.powf(beta + 1.0));
    }
    (nodes, weights)
}

/// Composite layout: uniform panels plus geometric panels shrinking toward one end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradedLayout {
    pub uniform_panels: usize,
    pub order: usize,
    pub ratio: f64,
    pub levels: usize,
    /// Fraction of the interval left to the graded part.
    pub graded_fraction: f64,
}

impl GradedLayout {
    pub fn angular_default() -> Self {
        Self { uniform_panels: 16, order: 6, ratio: 0.85, levels: 43, graded_fraction: 0.25 }
    }

    pub fn radial_default() -> Self {
        Self { uniform_panels: 8, order: 6, ratio: 0.85, levels: 76, graded_fraction: 0.25 }
    }

    /// Doubles the panel counts; the geometric part is refined by splitting each panel.
    pub fn refined(&self) -> Self {
        Self {
            uniform_panels: 2 * self.uniform_panels,
            order: self.order,
            ratio: self.ratio.sqrt(),
            levels: 2 * self.levels,
            graded_fraction: self.graded_fraction,
        }
    }

    /// Panel breakpoints measured as distance from the graded end, plus the
    /// width of the innermost panel handled by the singular-weight rule.
    fn breakpoints(&self, length: f64) -> (Vec<(f64, f64)>, f64) {
        let d0 = self.graded_fraction * length;
        let mut panels = Vec::new();
        let h = (length - d0) / self.uniform_panels as f64;
        for i in 0..self.uniform_panels {
            let far = length - i as f64 * h;
            panels.push((far - h, far));
        }
        let mut d = d0;
        for _ in 0..self.levels {
            let next = d * self.ratio;
            panels.push((next, d));
            d = next;
        }
        (panels, d)
    }
}

/// Quadrature in the polar angle for the measure sin^{N-1}(psi) cos^b(psi) d psi
/// on (0, pi/2).
#[derive(Debug, Clone)]
pub struct AngularGrid1D {
    pub n: usize,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AngularGrid1D {
    pub fn new(params: &WeightParams) -> Self {
        Self::with_layout(params, GradedLayout::angular_default())
    }

    pub fn with_layout(params: &WeightParams, layout: GradedLayout) -> Self {
        let (n, b) = (params.n, params.b);
        let (gx, gw) = gauss_legendre(layout.order);
        let (panels, inner) = layout.breakpoints(FRAC_PI_2);
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in panels {
            // lo, hi are distances tau = pi/2 - psi from the equator
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in gx.iter().zip(&gw) {
                let tau = mid + half * x;
                let psi = FRAC_PI_2 - tau;
                pts.push((psi, w * half * measure(n, b, psi)));
            }
        }
        let (jx, jw) = gauss_jacobi_unit(layout.order.max(4), b);
        for (x, w) in jx.iter().zip(&jw) {
            let tau = inner * x;
            let smooth = tau.cos().powi(n as i32 - 1) * sinc(tau).powf(b);
            pts.push((FRAC_PI_2 - tau, w * inner.powf(b + 1.0) * smooth));
        }
        pts.sort_by(|a, c| a.0.partial_cmp(&c.0).expect("finite nodes"));
        Self {
            n,
            b,
            nodes: pts.iter().map(|p| p.0).collect(),
            weights: pts.iter().map(|p| p.1).collect(),
        }
    }

    /// Wraps externally supplied nodes and weights (for example a finite-difference grid).
    pub fn from_parts(params: &WeightParams, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(LabError::Input("angular nodes and weights differ in length".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Input("angular nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LabError::Input("angular weights must be finite and nonnegative".into()));
        }
        Ok(Self { n: params.n, b: params.b, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of weight times sample (no sphere factor).
    pub fn dot(&self, g: &[f64]) -> f64 {
        self.weights.iter().zip(g).map(|(w, v)| w * v).sum()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// The angular density sin^{N-1} psi cos^b psi.
pub fn measure(n: usize, b: f64, psi: f64) -> f64 {
    psi.sin().powi(n as i32 - 1) * psi.cos().powf(b)
}

/// Quadrature for rho^{N+b} d rho on (0, r).
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub radius: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(params: &WeightParams, radius: f64, layout: GradedLayout) -> Result<Self> {
        let (nodes, weights) = weighted_line(params.n as f64 + params.b, radius, layout)?;
        Ok(Self { radius, nodes, weights })
    }
}

/// Composite rule for x^p dx on (0, length), p > -1, graded toward x = 0.
/// The innermost panel uses the Gauss-Jacobi rule for the weight itself.
pub fn weighted_line(p: f64, length: f64, layout: GradedLayout) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(LabError::Domain(format!("length {length} must be positive")));
    }
    if !(p > -1.0) {
        return Err(LabError::Domain(format!("weight exponent {p} must exceed -1")));
    }
    let (gx, gw) = gauss_legendre(layout.order);
    let (panels, inner) = layout.breakpoints(length);
    let mut pts = Vec::new();
    for (lo, hi) in panels {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gx.iter().zip(&gw) {
            let rho = mid + half * x;
            pts.push((rho, w * half * rho.powf(p)));
        }
    }
    let (jx, jw) = gauss_jacobi_unit(layout.order.max(4), p);
    for (x, w) in jx.iter().zip(&jw) {
        pts.push((inner * x, w * inner.powf(p + 1.0)));
    }
    pts.sort_by(|a, c| a.0.partial_cmp(&c.0).expect("finite nodes"));
    Ok((pts.iter().map(|q| q.0).collect(), pts.iter().map(|q| q.1).collect()))
}

/// Tensor grid on B_r^+ carrying the measure t^b dz.
#[derive(Debug, Clone)]
pub struct HalfBallGrid {
    pub params: WeightParams,
    pub radial: RadialGrid,
    pub angular: AngularGrid1D,
    /// |S^{N-1}|, the contribution of the omega block.
    pub sphere: f64,
}

impl HalfBallGrid {
    pub fn new(params: &WeightParams, radius: f64) -> Result<Self> {
        Self::with_layouts(params, radius, GradedLayout::radial_default(), GradedLayout::angular_default())
    }

    pub fn with_layouts(
        params: &WeightParams,
        radius: f64,
        radial: GradedLayout,
        angular: GradedLayout,
    ) -> Result<Self> {
        Ok(Self {
            params: *params,
            radial: RadialGrid::new(params, radius, radial)?,
            angular: AngularGrid1D::with_layout(params, angular),
            sphere: sphere_area(params.n),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radial.radius
    }

    pub fn len(&self) -> usize {
        self.radial.nodes.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples f(rho, psi) in row-major order (radial index outer).
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &rho in &self.radial.nodes {
            for &psi in &self.angular.nodes {
                out.push(f(rho, psi));
            }
        }
        out
    }

    /// Integrates a closure without storing samples.
    pub fn integrate_fn<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut total = 0.0;
        for (rho, wr) in self.radial.nodes.iter().zip(&self.radial.weights) {
            let mut inner = 0.0;
            for (psi, wa) in self.angular.nodes.iter().zip(&self.angular.weights) {
                inner += wa * f(*rho, *psi);
            }
            total += wr * inner;
        }
        total * self.sphere
    }
}

/// Integral of t^b f over B_r^+; `f` holds omega-averaged samples on `grid`.
pub fn integrate_halfball(grid: &HalfBallGrid, f: &[f64], r: f64) -> Result<f64> {
    let radius = grid.radius();
    if !(r > 0.0) || (r - radius).abs() > 1e-12 * radius {
        return Err(LabError::Domain(format!(
            "radius {r} not covered by a grid built for radius {radius}"
        )));
    }
    if f.len() != grid.len() {
        return Err(LabError::Input(format!("expected {} samples, got {}", grid.len(), f.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Input("non-finite sample".into()));
    }
    let na = grid.angular.len();
    let mut total = 0.0;
    for (i, wr) in grid.radial.weights.iter().enumerate() {
        total += wr * grid.angular.dot(&f[i * na..(i + 1) * na]);
    }
    Ok(total * grid.sphere)
}

/// Integral of t^b g over S_r^+; `g` holds omega-averaged samples on `grid`.
pub fn integrate_halfsphere(grid: &AngularGrid1D, g: &[f64], params: &WeightParams, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::Domain(format!("radius {r} must be positive")));
    }
    if g.len() != grid.len() {
        return Err(LabError::Input(format!("expected {} samples, got {}", grid.len(), g.len())));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Input("non-finite sample".into()));
    }
    let n = params.n as f64;
    Ok(r.powf(n + params.b) * sphere_area(params.n) * grid.dot(g))
}
