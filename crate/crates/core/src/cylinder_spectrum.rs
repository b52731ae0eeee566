//! Eigenbasis of -Δ_b on the half cylinder Q_{2R}^+ = B'_{2R} x (0, 2R) with
//! Dirichlet data on the lateral side and the top, and the weighted Neumann
//! condition on t = 0:
//!   e_{n,m}(x, t) = gamma_m t^alpha J_{-alpha}(j_{-alpha,m} t / 2R) e_n(x),
//!   lambda_{n,m} = mu_n + j_{-alpha,m}^2 / (4 R^2).
//! The Dirichlet factor e_n is closed form on the interval (N = 1) and the disk (N = 2).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::params::WeightParams;
use crate::quadrature::{gauss_legendre, weighted_line, GradedLayout};
use crate::special_functions::{bessel_j_real, bessel_zeros_below, bessel_zeros_real, h_unchecked, radial_norm_from_zero};

/// Default number of indices per direction in expansions.
pub const DEFAULT_TRUNCATION: usize = 32;
const DROP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DirichletKind {
    /// sin(n pi (x + 2R) / 4R) on (-2R, 2R).
    Interval { n: usize },
    /// J_k(j r / 2R) times cos(k theta) or sin(k theta) on the disk of radius 2R.
    Disk { k: usize, p: usize, j: f64, sine: bool },
}

/// One normalized Dirichlet eigenfunction of B'_{2R}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletMode {
    pub mu: f64,
    pub kind: DirichletKind,
    /// Radius 2R of B'_{2R}.
    pub radius: f64,
    norm: f64,
}

impl DirichletMode {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let a = self.radius;
        match self.kind {
            DirichletKind::Interval { n } => {
                if x[0].abs() > a {
                    return 0.0;
                }
                self.norm * (n as f64 * PI * (x[0] + a) / (2.0 * a)).sin()
            }
            DirichletKind::Disk { k, j, sine, .. } => {
                let r = x[0].hypot(x[1]);
                if r > a {
                    return 0.0;
                }
                let th = x[1].atan2(x[0]);
                let ang = if sine { (k as f64 * th).sin() } else { (k as f64 * th).cos() };
                self.norm * bessel_j_real(k as f64, j * r / a) * ang
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let a = self.radius;
        match self.kind {
            DirichletKind::Interval { n } => {
                let c = n as f64 * PI / (2.0 * a);
                vec![self.norm * c * (c * (x[0] + a)).cos()]
            }
            DirichletKind::Disk { k, j, sine, .. } => {
                let kap = j / a;
                let r = x[0].hypot(x[1]);
                let kf = k as f64;
                if r < 1e-300 {
                    // Only k = 1 has a nonzero gradient at the center: J_1(kap r) ~ kap r / 2.
                    return if k == 1 {
                        let g = self.norm * kap / 2.0;
                        if sine { vec![0.0, g] } else { vec![g, 0.0] }
                    } else {
                        vec![0.0, 0.0]
                    };
                }
                let th = x[1].atan2(x[0]);
                let (ang, dang) = if sine {
                    ((kf * th).sin(), kf * (kf * th).cos())
                } else {
                    ((kf * th).cos(), -kf * (kf * th).sin())
                };
                let s = kap * r;
                let jk = bessel_j_real(kf, s);
                let djk = if k == 0 {
                    -kap * bessel_j_real(1.0, s)
                } else {
                    kap * 0.5 * (bessel_j_real(kf - 1.0, s) - bessel_j_real(kf + 1.0, s))
                };
                let (c, sn) = (th.cos(), th.sin());
                let gr = self.norm * djk * ang;
                let gt = self.norm * jk * dang / r;
                vec![gr * c - gt * sn, gr * sn + gt * c]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpectrum {
    pub dim: usize,
    /// Radius 2R of B'_{2R}.
    pub radius: f64,
    pub modes: Vec<DirichletMode>,
}

/// The `count` lowest Dirichlet eigenpairs of B'_{2R} in dimension 1 or 2, with
/// degenerate disk eigenvalues listed once per eigenfunction.
pub fn dirichlet_eigs(n: usize, r: f64, count: usize) -> Result<DirichletSpectrum> {
    if n == 0 || n >= 3 {
        return Err(LabError::UnsupportedDimension(n));
    }
    if count == 0 {
        return Err(LabError::Input("count must be at least 1".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::Domain(format!("radius {r} must be positive")));
    }
    let a = 2.0 * r;
    let modes = if n == 1 {
        (1..=count)
            .map(|k| DirichletMode {
                mu: (k as f64 * PI / (2.0 * a)).powi(2),
                kind: DirichletKind::Interval { n: k },
                radius: a,
                norm: 1.0 / a.sqrt(),
            })
            .collect()
    } else {
        disk_modes(a, count)
    };
    Ok(DirichletSpectrum { dim: n, radius: a, modes })
}

fn disk_modes(a: f64, count: usize) -> Vec<DirichletMode> {
    // Weyl: about j^2 / 4 eigenfunctions below j^2 / a^2; grow the bound until enough.
    let mut bound = (4.0 * count as f64).sqrt() + 4.0;
    loop {
        let kmax = bound.ceil() as usize;
        let per_k: Vec<Vec<f64>> = (0..=kmax).into_par_iter().map(|k| bessel_zeros_below(k as f64, bound)).collect();
        let mut all = Vec::new();
        for (k, zs) in per_k.iter().enumerate() {
            for (p, &j) in zs.iter().enumerate() {
                let jn = bessel_j_real(k as f64 + 1.0, j);
                let area = if k == 0 { 2.0 * PI } else { PI };
                let norm = 1.0 / (a * a / 2.0 * jn * jn * area).sqrt();
                let mu = (j / a).powi(2);
                all.push(DirichletMode { mu, kind: DirichletKind::Disk { k, p: p + 1, j, sine: false }, radius: a, norm });
                if k > 0 {
                    all.push(DirichletMode { mu, kind: DirichletKind::Disk { k, p: p + 1, j, sine: true }, radius: a, norm });
                }
            }
        }
        if all.len() >= count {
            all.sort_by(|x, y| x.mu.partial_cmp(&y.mu).expect("finite"));
            all.truncate(count);
            return all;
        }
        bound *= 1.5;
    }
}

/// One eigenfunction e_{n,m} of the half cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderMode {
    pub n: usize,
    pub m: usize,
    pub mu_n: f64,
    /// j_{-alpha, m}.
    pub j: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Reference radius R; the cylinder is B'_{2R} x (0, 2R).
    pub r: f64,
    pub dirichlet: DirichletMode,
}

impl CylinderMode {
    /// gamma_m t^alpha J_{-alpha}(j t / 2R), written through h(s) = s^alpha J_{-alpha}(s).
    pub fn t_factor(&self, t: f64) -> f64 {
        let c = self.j / (2.0 * self.r);
        self.gamma * c.powf(-self.alpha) * h_unchecked(self.alpha, c * t)
    }

    /// d/dt of `t_factor`.
    pub fn t_factor_prime(&self, t: f64) -> f64 {
        let c = self.j / (2.0 * self.r);
        let s = c * t;
        // h'(s) = -s^alpha J_{1-alpha}(s).
        let hp = if s == 0.0 { 0.0 } else { -s.powf(self.alpha) * bessel_j_real(1.0 - self.alpha, s) };
        self.gamma * c.powf(1.0 - self.alpha) * hp
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.t_factor(t) * self.dirichlet.eval(x)
    }

    /// (grad_x, d_t) stacked as an (N+1)-vector.
    pub fn grad(&self, x: &[f64], t: f64) -> Vec<f64> {
        let tf = self.t_factor(t);
        let mut g: Vec<f64> = self.dirichlet.grad(x).into_iter().map(|v| v * tf).collect();
        g.push(self.t_factor_prime(t) * self.dirichlet.eval(x));
        g
    }
}

fn check_dim(params: &WeightParams) -> Result<()> {
    if params.n >= 3 {
        return Err(LabError::UnsupportedDimension(params.n));
    }
    Ok(())
}

/// The mode e_{n,m} for the parameters' (N, R).
pub fn cylinder_mode(params: &WeightParams, n: usize, m: usize) -> Result<CylinderMode> {
    if n == 0 || m == 0 {
        return Err(LabError::Domain("mode indices start at 1".into()));
    }
    CylinderBasis::new(params, n, m)?.mode(n, m)
}

/// Dirichlet spectrum and Bessel zeros for indices up to (n_max, m_max).
#[derive(Debug, Clone)]
pub struct CylinderBasis {
    pub params: WeightParams,
    pub spectrum: DirichletSpectrum,
    pub zeros: Vec<f64>,
}

impl CylinderBasis {
    pub fn new(params: &WeightParams, n_max: usize, m_max: usize) -> Result<Self> {
        check_dim(params)?;
        if n_max == 0 || m_max == 0 {
            return Err(LabError::Domain("mode indices start at 1".into()));
        }
        Ok(Self {
            params: *params,
            spectrum: dirichlet_eigs(params.n, params.r, n_max)?,
            zeros: bessel_zeros_real(-params.alpha(), m_max),
        })
    }

    pub fn n_max(&self) -> usize {
        self.spectrum.modes.len()
    }

    pub fn m_max(&self) -> usize {
        self.zeros.len()
    }

    pub fn eigenvalue(&self, n: usize, m: usize) -> Result<f64> {
        Ok(self.mode(n, m)?.lambda)
    }

    pub fn mode(&self, n: usize, m: usize) -> Result<CylinderMode> {
        if n == 0 || m == 0 || n > self.n_max() || m > self.m_max() {
            return Err(LabError::Domain(format!("mode ({n}, {m}) outside the basis")));
        }
        let d = self.spectrum.modes[n - 1];
        let j = self.zeros[m - 1];
        let r = self.params.r;
        Ok(CylinderMode {
            n,
            m,
            mu_n: d.mu,
            j,
            lambda: d.mu + j * j / (4.0 * r * r),
            gamma: radial_norm_from_zero(&self.params, j),
            alpha: self.params.alpha(),
            r,
            dirichlet: d,
        })
    }

    /// Weighted L^2 coefficients of `f` on every mode of the basis.
    pub fn project<F: Fn(&[f64], f64) -> f64 + Sync>(&self, f: F, grid: &CylinderGrid) -> Result<BTreeMap<(usize, usize), f64>> {
        let modes: Vec<Vec<CylinderMode>> = (1..=self.n_max())
            .map(|n| (1..=self.m_max()).map(|m| self.mode(n, m)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let xs: Vec<Vec<f64>> = (0..self.n_max())
            .map(|n| grid.x_nodes.iter().map(|x| modes[n][0].dirichlet.eval(x)).collect())
            .collect();
        let ts: Vec<Vec<f64>> = (0..self.m_max())
            .map(|m| grid.t_nodes.iter().map(|&t| modes[0][m].t_factor(t)).collect())
            .collect();
        let samples: Vec<Vec<f64>> = grid
            .x_nodes
            .par_iter()
            .map(|x| grid.t_nodes.iter().map(|&t| f(x, t)).collect())
            .collect();
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LabError::Input("non-finite sample".into()));
        }
        // Contract t first: g[x][m] = sum_t w_t f(x, t) T_m(t).
        let g: Vec<Vec<f64>> = samples
            .par_iter()
            .map(|row| {
                ts.iter()
                    .map(|tm| row.iter().zip(tm).zip(&grid.t_weights).map(|((f, e), w)| f * e * w).sum())
                    .collect()
            })
            .collect();
        let mut out = BTreeMap::new();
        for n in 0..self.n_max() {
            for m in 0..self.m_max() {
                let c: f64 = (0..grid.x_nodes.len()).map(|i| grid.x_weights[i] * xs[n][i] * g[i][m]).sum();
                out.insert((n + 1, m + 1), c);
            }
        }
        Ok(out)
    }

    /// Sum of c_{n,m} e_{n,m}(x, t).
    pub fn reconstruct(&self, coeffs: &BTreeMap<(usize, usize), f64>, x: &[f64], t: f64) -> Result<f64> {
        let mut s = 0.0;
        for (&(n, m), &c) in coeffs {
            s += c * self.mode(n, m)?.eval(x, t);
        }
        Ok(s)
    }
}

/// Coefficients of the solution of -Δ_b phi = psi: c_{n,m} / lambda_{n,m}.
pub fn poisson_solve(params: &WeightParams, coeffs: &BTreeMap<(usize, usize), f64>, truncation: usize) -> Result<BTreeMap<(usize, usize), f64>> {
    check_dim(params)?;
    let mut nmax = 0;
    let mut mmax = 0;
    for (&(n, m), &c) in coeffs {
        if !c.is_finite() {
            return Err(LabError::Input(format!("coefficient ({n}, {m}) is not finite")));
        }
        if n == 0 || m == 0 || n > truncation || m > truncation {
            return Err(LabError::Input(format!("index ({n}, {m}) outside truncation {truncation}")));
        }
        nmax = nmax.max(n);
        mmax = mmax.max(m);
    }
    if coeffs.is_empty() {
        return Ok(BTreeMap::new());
    }
    let basis = CylinderBasis::new(params, nmax, mmax)?;
    let mut out = BTreeMap::new();
    for (&(n, m), &c) in coeffs {
        if c.abs() < DROP {
            continue;
        }
        let lam = basis.eigenvalue(n, m)?;
        if lam.abs() < 1e-300 {
            return Err(LabError::Solver(format!("zero eigenvalue at ({n}, {m})")));
        }
        out.insert((n, m), c / lam);
    }
    Ok(out)
}

/// Tensor quadrature on Q_{2R}^+ for the measure t^b dx dt.
#[derive(Debug, Clone)]
pub struct CylinderGrid {
    pub x_nodes: Vec<Vec<f64>>,
    pub x_weights: Vec<f64>,
    pub t_nodes: Vec<f64>,
    pub t_weights: Vec<f64>,
}

impl CylinderGrid {
    pub fn new(params: &WeightParams) -> Result<Self> {
        Self::with_panels(params, 32, 8)
    }

    /// `panels` Gauss-Legendre panels of `order` points per unit direction.
    pub fn with_panels(params: &WeightParams, panels: usize, order: usize) -> Result<Self> {
        check_dim(params)?;
        let a = 2.0 * params.r;
        let (gx, gw) = gauss_legendre(order);
        let line = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
            let h = (hi - lo) / panels as f64;
            let mut v = Vec::new();
            for p in 0..panels {
                let m = lo + (p as f64 + 0.5) * h;
                for (x, w) in gx.iter().zip(&gw) {
                    v.push((m + 0.5 * h * x, 0.5 * h * w));
                }
            }
            v
        };
        let (x_nodes, x_weights) = if params.n == 1 {
            line(-a, a).into_iter().map(|(x, w)| (vec![x], w)).unzip()
        } else {
            let nth = 4 * panels;
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for (r, w) in line(0.0, a) {
                for i in 0..nth {
                    let th = 2.0 * PI * i as f64 / nth as f64;
                    xs.push(vec![r * th.cos(), r * th.sin()]);
                    ws.push(w * r * 2.0 * PI / nth as f64);
                }
            }
            (xs, ws)
        };
        let layout = GradedLayout { uniform_panels: panels, order, ratio: 0.85, levels: 60, graded_fraction: 0.25 };
        let (t_nodes, t_weights) = weighted_line(params.b, a, layout)?;
        Ok(Self { x_nodes, x_weights, t_nodes, t_weights })
    }

    pub fn integrate<F: Fn(&[f64], f64) -> f64 + Sync>(&self, f: F) -> f64 {
        self.x_nodes
            .par_iter()
            .zip(&self.x_weights)
            .map(|(x, wx)| wx * self.t_nodes.iter().zip(&self.t_weights).map(|(&t, wt)| wt * f(x, t)).sum::<f64>())
            .sum()
    }
}
