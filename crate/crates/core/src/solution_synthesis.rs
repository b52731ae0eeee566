//! Exact separable solutions of the system Δ_b U = V, Δ_b V = 0 built from
//! half-sphere eigenmodes, their Fourier coefficients, and the blow-up fitter.
//!
//! A term with mode (mu, sigma = sigma_plus, Y) contributes
//!   U = (c1 r^sigma + (d1 / K) r^{sigma+2}) Y,   V = d1 r^sigma Y,
//! where K = (sigma+2)(sigma+1) + (N+b)(sigma+2) - mu.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hemisphere_spectrum::{harmonic, k_constant, SpectralMode};
use crate::params::WeightParams;

/// A sum of monomials a r^p.
pub type PowerSeries = Vec<(f64, f64)>;

/// Requested term: distinct eigenvalue `l`, which of its channel modes, and (c1, d1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub l: usize,
    #[serde(default)]
    pub channel: usize,
    pub c1: f64,
    pub d1: f64,
}

#[derive(Debug, Clone)]
pub struct Term {
    pub mode: SpectralMode,
    pub c1: f64,
    pub d1: f64,
    pub k_const: f64,
}

impl Term {
    pub fn sigma(&self) -> f64 {
        self.mode.sigma_plus
    }

    /// Radial factor of U.
    pub fn u_series(&self) -> PowerSeries {
        let s = self.sigma();
        vec![(self.c1, s), (self.d1 / self.k_const, s + 2.0)]
    }

    /// Radial factor of V.
    pub fn v_series(&self) -> PowerSeries {
        vec![(self.d1, self.sigma())]
    }

    /// (phi, phi', phi~, phi~') at radius r.
    pub fn radial(&self, r: f64) -> (f64, f64, f64, f64) {
        let (f, df) = eval_series(&self.u_series(), r);
        let (g, dg) = eval_series(&self.v_series(), r);
        (f, df, g, dg)
    }
}

/// Value and derivative of a power series at r > 0.
pub fn eval_series(s: &PowerSeries, r: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &(a, p) in s {
        if a == 0.0 {
            continue;
        }
        let rp = r.powf(p);
        v += a * rp;
        if p != 0.0 {
            d += a * p * rp / r;
        }
    }
    (v, d)
}

#[derive(Debug, Clone)]
pub struct SeparableSolution {
    pub params: WeightParams,
    pub terms: Vec<Term>,
    /// Evaluation radius cap.
    pub radius: f64,
}

impl SeparableSolution {
    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.c1 == 0.0 && t.d1 == 0.0)
    }

    /// Scales every coefficient by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.c1 *= c;
            t.d1 *= c;
        }
        out
    }

    /// The spherical-harmonic channels present, in increasing order.
    pub fn channels(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.terms.iter().map(|t| t.mode.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// The smallest leading exponent over nonzero terms: sigma if (c1, d1) has a
    /// V part or c1 != 0, which is always sigma for the system.
    pub fn leading_exponent(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter(|t| t.c1 != 0.0 || t.d1 != 0.0)
            .map(|t| t.sigma())
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.min(s))))
    }
}

/// Builds the separable solution for `spec` from a merged mode list.
pub fn synthesize(params: &WeightParams, modes: &[SpectralMode], spec: &[TermSpec]) -> Result<SeparableSolution> {
    let mut terms: Vec<Term> = Vec::with_capacity(spec.len());
    for ts in spec {
        if !ts.c1.is_finite() || !ts.d1.is_finite() {
            return Err(LabError::Input("coefficients must be finite".into()));
        }
        let group: Vec<&SpectralMode> = modes.iter().filter(|m| m.l == ts.l).collect();
        let mode = group.get(ts.channel).ok_or_else(|| {
            LabError::Input(format!("no mode with l = {} and channel {}", ts.l, ts.channel))
        })?;
        if terms.iter().any(|t| t.mode.k == mode.k && t.mode.index == mode.index) {
            return Err(LabError::Input(format!("mode l = {} channel {} listed twice", ts.l, ts.channel)));
        }
        let k_const = k_constant(params, mode)?;
        terms.push(Term { mode: (*mode).clone(), c1: ts.c1, d1: ts.d1, k_const });
    }
    Ok(SeparableSolution { params: *params, terms, radius: params.r })
}

/// Values and Cartesian gradients of (U, V) at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointValue {
    pub u: f64,
    pub v: f64,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
}

/// Evaluates at radius r and polar angle psi along the azimuth omega = e_1.
pub fn eval_solution(sol: &SeparableSolution, r: f64, psi: f64) -> Result<PointValue> {
    let n = sol.params.n;
    let mut z = vec![0.0; n + 1];
    z[0] = r * psi.sin();
    z[n] = r * psi.cos();
    eval_point(sol, &z)
}

/// Evaluates at a Cartesian point z = (x, t) with t >= 0 and 0 < |z| <= R.
pub fn eval_point(sol: &SeparableSolution, z: &[f64]) -> Result<PointValue> {
    let n = sol.params.n;
    if z.len() != n + 1 {
        return Err(LabError::Input(format!("point has {} coordinates, expected {}", z.len(), n + 1)));
    }
    let rho = z.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(rho > 0.0) || rho > sol.radius * (1.0 + 1e-12) || z[n] < 0.0 {
        return Err(LabError::Domain(format!("point at radius {rho} outside the half ball of radius {}", sol.radius)));
    }
    let t = z[n];
    let s = z[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
    let psi = s.atan2(t);
    let omega: Vec<f64> = if s > 0.0 {
        z[..n].iter().map(|c| c / s).collect()
    } else {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    };
    let (sp, cp) = (psi.sin(), psi.cos());
    let rhat: Vec<f64> = z.iter().map(|c| c / rho).collect();
    let mut psihat = vec![0.0; n + 1];
    for i in 0..n {
        psihat[i] = cp * omega[i];
    }
    psihat[n] = -sp;
    let mut out = PointValue { u: 0.0, v: 0.0, grad_u: vec![0.0; n + 1], grad_v: vec![0.0; n + 1] };
    for term in &sol.terms {
        let (f, df, g, dg) = term.radial(rho);
        let (p, dp) = term.mode.profile.eval(psi);
        let (zk, gz) = harmonic(n, term.mode.k, &omega);
        out.u += f * p * zk;
        out.v += g * p * zk;
        for i in 0..=n {
            out.grad_u[i] += df * p * zk * rhat[i] + f / rho * dp * zk * psihat[i];
            out.grad_v[i] += dg * p * zk * rhat[i] + g / rho * dp * zk * psihat[i];
        }
        if term.mode.k > 0 && sp > 1e-300 {
            for i in 0..n {
                out.grad_u[i] += f * p / (rho * sp) * gz[i];
                out.grad_v[i] += g * p / (rho * sp) * gz[i];
            }
        }
    }
    Ok(out)
}

/// Weighted angular projection of (U, V) at radius lambda onto `mode`.
pub fn fourier_coefficient(sol: &SeparableSolution, mode: &SpectralMode, lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || lambda > sol.radius * (1.0 + 1e-12) {
        return Err(LabError::Domain(format!("radius {lambda} outside (0, {}]", sol.radius)));
    }
    let grid = &mode.profile.grid;
    let mut u = vec![0.0; grid.len()];
    let mut v = vec![0.0; grid.len()];
    for term in sol.terms.iter().filter(|t| t.mode.k == mode.k) {
        let (f, _, g, _) = term.radial(lambda);
        let same_grid = term.mode.profile.values.len() == mode.profile.values.len();
        for (j, psi) in grid.nodes.iter().enumerate() {
            let p = if same_grid { term.mode.profile.values[j] } else { term.mode.profile.value(*psi) };
            u[j] += f * p;
            v[j] += g * p;
        }
    }
    Ok(project(mode, &u, &v))
}

/// Projection of channel samples (taken at the mode's own angular nodes) onto the mode.
pub fn project(mode: &SpectralMode, u: &[f64], v: &[f64]) -> (f64, f64) {
    let g = &mode.profile.grid;
    let p = &mode.profile.values;
    let mut a = 0.0;
    let mut b = 0.0;
    for j in 0..g.len() {
        a += g.weights[j] * p[j] * u[j];
        b += g.weights[j] * p[j] * v[j];
    }
    (a, b)
}

/// A candidate leading exponent with its resonance constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sigma: f64,
    pub k_const: f64,
}

impl Candidate {
    pub fn from_mode(params: &WeightParams, mode: &SpectralMode) -> Result<Self> {
        Ok(Self { sigma: mode.sigma_plus, k_const: k_constant(params, mode)? })
    }
}

/// Which blow-up profile describes the leading behavior of U.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// U vanishes to order sigma.
    Sigma,
    /// All c1 vanish; U vanishes to order sigma + 2 and is driven by V.
    SigmaPlusTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub sigma_used: f64,
    pub c1_hat: f64,
    pub d1_hat: f64,
    pub residual: f64,
    pub delta1: f64,
    pub delta2: Option<f64>,
    pub branch: Branch,
}

const FIT_FAIL: f64 = 1e-3;
const DROP: f64 = 1e-13;

/// Least-squares fit of (c1, d1) per candidate; keeps the best candidate.
pub fn fit_blowup(samples: &[(f64, f64, f64)], candidates: &[Candidate]) -> Result<CoefficientFit> {
    let rows: Vec<&(f64, f64, f64)> = samples
        .iter()
        .filter(|(_, f, g)| f.abs() >= DROP || g.abs() >= DROP)
        .collect();
    if rows.len() < 6 {
        return Err(LabError::Input(format!("need at least 6 informative radii, got {}", rows.len())));
    }
    if rows.iter().any(|(l, f, g)| !(*l > 0.0) || !f.is_finite() || !g.is_finite()) {
        return Err(LabError::Input("samples must have positive radii and finite values".into()));
    }
    let lmin = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let lmax = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    if lmax / lmin < 10.0 * (1.0 - 1e-9) {
        return Err(LabError::Input("radii must span at least a decade".into()));
    }
    if candidates.is_empty() {
        return Err(LabError::Input("no candidate exponents".into()));
    }
    let mut best: Option<CoefficientFit> = None;
    for c in candidates {
        // Each radius gives two rows, weighted so the data vector has unit norm per radius.
        let mut a = Vec::with_capacity(2 * rows.len());
        let mut y = Vec::with_capacity(2 * rows.len());
        for &&(l, f, g) in &rows {
            let w = 1.0 / (f * f + g * g).sqrt();
            let ls = l.powf(c.sigma);
            a.push([w * ls, w * ls * l * l / c.k_const]);
            y.push(w * f);
            a.push([0.0, w * ls]);
            y.push(w * g);
        }
        let (x, res) = least_squares_2(&a, &y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let residual = res / norm;
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            let (c1, d1) = (x[0], x[1]);
            let scale = c1.abs().max((d1 / c.k_const).abs());
            let branch = if c1.abs() <= 1e-7 * scale { Branch::SigmaPlusTwo } else { Branch::Sigma };
            let delta1 = match branch {
                Branch::Sigma => c.sigma,
                Branch::SigmaPlusTwo => c.sigma + 2.0,
            };
            let delta2 = if d1.abs() > 1e-7 * scale { Some(c.sigma) } else { None };
            best = Some(CoefficientFit { sigma_used: c.sigma, c1_hat: c1, d1_hat: d1, residual, delta1, delta2, branch });
        }
    }
    let best = best.expect("candidates nonempty");
    if best.residual > FIT_FAIL {
        return Err(LabError::ClassificationFailed { residual: best.residual });
    }
    Ok(best)
}

/// Two-column least squares by modified Gram-Schmidt; returns (x, ||Ax - y||).
fn least_squares_2(a: &[[f64; 2]], y: &[f64]) -> ([f64; 2], f64) {
    let n = a.len();
    let mut q0: Vec<f64> = a.iter().map(|r| r[0]).collect();
    let mut q1: Vec<f64> = a.iter().map(|r| r[1]).collect();
    let r00 = q0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r01 = 0.0;
    let mut z = y.to_vec();
    let c0;
    if r00 > 0.0 {
        q0.iter_mut().for_each(|v| *v /= r00);
        r01 = (0..n).map(|i| q0[i] * q1[i]).sum::<f64>();
        for i in 0..n {
            q1[i] -= r01 * q0[i];
        }
        c0 = (0..n).map(|i| q0[i] * z[i]).sum::<f64>();
        for i in 0..n {
            z[i] -= c0 * q0[i];
        }
    } else {
        c0 = 0.0;
    }
    let n1 = q1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r11 = n1;
    let c1 = if n1 > 0.0 {
        q1.iter_mut().for_each(|v| *v /= n1);
        let c = (0..n).map(|i| q1[i] * z[i]).sum::<f64>();
        for i in 0..n {
            z[i] -= c * q1[i];
        }
        c
    } else {
        0.0
    };
    let x1 = if r11 > 0.0 { c1 / r11 } else { 0.0 };
    let x0 = if r00 > 0.0 { (c0 - r01 * x1) / r00 } else { 0.0 };
    let res = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    ([x0, x1], res)
}

/// Geometric radii (ratio 0.7) from R/4 down to R/400.
pub fn fit_radii(r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = r / 4.0;
    while l >= r / 400.0 * (1.0 - 1e-12) {
        out.push(l);
        l *= 0.7;
    }
    out
}

/// Fourier coefficient samples of `mode` over the fitting radii.
pub fn coefficient_samples(sol: &SeparableSolution, mode: &SpectralMode) -> Result<Vec<(f64, f64, f64)>> {
    fit_radii(sol.radius)
        .into_iter()
        .map(|l| fourier_coefficient(sol, mode, l).map(|(f, g)| (l, f, g)))
        .collect()
}
