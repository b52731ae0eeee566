//! Almgren frequency N(r) = D(r)/H(r) for separable solutions, with
//!   D(r) = r^{1-N-b} int_{B_r^+} t^b (|grad U|^2 + |grad V|^2 + U V),
//!   H(r) = r^{-N-b} int_{S_r^+} t^b (U^2 + V^2),
//! the derivative identities, both Pohozaev identities and the vanishing order.
//!
//! Two independent evaluators are provided. The closed-form path integrates the
//! radial power laws exactly and relies on orthonormality of the angular modes.
//! The quadrature path integrates on a tensor grid: angular Gram matrices of the
//! interpolated profiles combined with radial quadrature of coefficient products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::{AngularGrid1D, GradedLayout, RadialGrid};
use crate::solution_synthesis::{eval_series, Branch, PowerSeries, SeparableSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

/// Which fields enter D and H.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    /// (U, V) jointly.
    System,
    /// U alone: D = r^{1-N-b} int (|grad U|^2 + U V) and H = r^{-N-b} int_S U^2.
    /// The U V term keeps H' = 2D/r, since it is the U half of the energy identity.
    UOnly,
}

/// Raw weighted integrals at one radius: bulk terms over B_r^+, shell terms
/// (prefixed `s_`) over S_r^+, all with the weight t^b and nothing rescaled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    pub r: f64,
    /// N + b.
    pub nb: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub uv: f64,
    /// int V (z . grad U).
    pub v_radial_u: f64,
    pub s_u2: f64,
    pub s_v2: f64,
    pub s_uv: f64,
    pub s_un2: f64,
    pub s_vn2: f64,
    pub s_u_un: f64,
    pub s_v_vn: f64,
    pub s_grad_u: f64,
    pub s_grad_v: f64,
    /// A B - C^2 for the boundary vectors (U, V) and (d_r U, d_r V), when known
    /// in a cancellation-free form.
    pub gram_defect: Option<f64>,
}

impl Integrals {
    pub fn d(&self, c: Component) -> f64 {
        let e = match c {
            Component::System => self.grad_u + self.grad_v + self.uv,
            Component::UOnly => self.grad_u + self.uv,
        };
        self.r.powf(1.0 - self.nb) * e
    }

    pub fn h(&self, c: Component) -> f64 {
        let s = match c {
            Component::System => self.s_u2 + self.s_v2,
            Component::UOnly => self.s_u2,
        };
        self.r.powf(-self.nb) * s
    }

    /// (nu1, nu2) with N' = nu1 + nu2 for the system.
    pub fn nu(&self) -> Result<(f64, f64)> {
        let a = self.s_un2 + self.s_vn2;
        let b = self.s_u2 + self.s_v2;
        let c = self.s_u_un + self.s_v_vn;
        if !(b > 0.0) {
            return Err(LabError::VanishingDenominator { r: self.r, h: b });
        }
        let defect = self.gram_defect.unwrap_or(a * b - c * c);
        let r = self.r;
        let nu1 = 2.0 * r * defect / (b * b);
        let nu2 = (r * self.s_uv - 2.0 * self.v_radial_u - (self.nb - 1.0) * self.uv) / b;
        Ok((nu1, nu2))
    }

    /// Relative residuals of the two Pohozaev identities.
    pub fn pohozaev(&self) -> (f64, f64) {
        let l1 = self.grad_u + self.grad_v + self.uv;
        let r1 = self.s_u_un + self.s_v_vn;
        let g = self.grad_u + self.grad_v;
        let l2 = -(self.nb - 1.0) / 2.0 * g + self.r / 2.0 * (self.s_grad_u + self.s_grad_v);
        let r2 = self.r * (self.s_un2 + self.s_vn2) - self.v_radial_u;
        (relative(l1, r1), relative(l2, r2))
    }

    /// Bulk terms from `self`, shell terms from `shell`.
    pub fn with_shell(&self, shell: &Integrals) -> Integrals {
        Integrals {
            s_u2: shell.s_u2,
            s_v2: shell.s_v2,
            s_uv: shell.s_uv,
            s_un2: shell.s_un2,
            s_vn2: shell.s_vn2,
            s_u_un: shell.s_u_un,
            s_v_vn: shell.s_v_vn,
            s_grad_u: shell.s_grad_u,
            s_grad_v: shell.s_grad_v,
            gram_defect: shell.gram_defect,
            ..*self
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}

fn check_radius(sol: &SeparableSolution, r: f64) -> Result<()> {
    if !(r > 0.0) || r > sol.radius * (1.0 + 1e-12) {
        return Err(LabError::Domain(format!("radius {r} outside (0, {}]", sol.radius)));
    }
    Ok(())
}

/// int_0^r rho^{extra} sum_{ij} w(p_i, p_j) a_i c_j rho^{p_i + p_j} d rho.
fn power_integral(a: &PowerSeries, c: &PowerSeries, extra: f64, r: f64, w: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let mut total = 0.0;
    for &(ai, pi) in a {
        for &(cj, pj) in c {
            let coef = ai * cj * w(pi, pj);
            if coef == 0.0 {
                continue;
            }
            let q = pi + pj + extra + 1.0;
            if q <= 0.0 {
                return Err(LabError::Domain(format!("divergent radial integral with exponent {}", q - 1.0)));
            }
            total += coef * r.powf(q) / q;
        }
    }
    Ok(total)
}

fn closed_integrals(sol: &SeparableSolution, r: f64) -> Result<Integrals> {
    check_radius(sol, r)?;
    let nb = sol.params.n as f64 + sol.params.b;
    let rn = r.powf(nb);
    let mut out = Integrals { r, nb, ..Default::default() };
    // Boundary vectors for the cancellation-free Gram defect.
    let mut vals = Vec::with_capacity(2 * sol.terms.len());
    let mut ders = Vec::with_capacity(2 * sol.terms.len());
    for t in &sol.terms {
        let mu = t.mode.mu;
        let f = t.u_series();
        let g = t.v_series();
        let grad = |p1: f64, p2: f64| p1 * p2 + mu;
        out.grad_u += power_integral(&f, &f, nb - 2.0, r, grad)?;
        out.grad_v += power_integral(&g, &g, nb - 2.0, r, grad)?;
        out.uv += power_integral(&f, &g, nb, r, |_, _| 1.0)?;
        out.v_radial_u += power_integral(&g, &f, nb, r, |_, pf| pf)?;
        let (fv, fd) = eval_series(&f, r);
        let (gv, gd) = eval_series(&g, r);
        out.s_u2 += rn * fv * fv;
        out.s_v2 += rn * gv * gv;
        out.s_uv += rn * fv * gv;
        out.s_un2 += rn * fd * fd;
        out.s_vn2 += rn * gd * gd;
        out.s_u_un += rn * fv * fd;
        out.s_v_vn += rn * gv * gd;
        out.s_grad_u += rn * (fd * fd + mu * fv * fv / (r * r));
        out.s_grad_v += rn * (gd * gd + mu * gv * gv / (r * r));
        vals.extend([fv, gv]);
        ders.extend([fd, gd]);
    }
    // Lagrange identity: A B - C^2 = sum_{i<j} (a_i b_j - a_j b_i)^2.
    let mut defect = 0.0;
    for i in 0..vals.len() {
        for j in 0..i {
            let x = ders[i] * vals[j] - ders[j] * vals[i];
            defect += x * x;
        }
    }
    out.gram_defect = Some(defect * rn * rn);
    Ok(out)
}

/// Tensor-grid evaluator. Angular Gram matrices are assembled once per
/// solution; each radius then needs only a radial quadrature.
#[derive(Debug, Clone)]
pub struct QuadratureEvaluator {
    sol: SeparableSolution,
    radial_layout: GradedLayout,
    channels: Vec<ChannelGram>,
}

#[derive(Debug, Clone)]
struct ChannelGram {
    terms: Vec<usize>,
    /// int P_i P_j, int P_i' P_j' + k(k+N-2) P_i P_j / sin^2.
    mass: Vec<f64>,
    stiff: Vec<f64>,
}

impl QuadratureEvaluator {
    pub fn new(sol: &SeparableSolution) -> Self {
        Self::with_layouts(sol, GradedLayout::radial_default(), GradedLayout::angular_default())
    }

    pub fn with_layouts(sol: &SeparableSolution, radial: GradedLayout, angular: GradedLayout) -> Self {
        let params = &sol.params;
        let grid = AngularGrid1D::with_layout(params, angular);
        let n = params.n;
        let mut channels = Vec::new();
        for k in sol.channels() {
            let terms: Vec<usize> = (0..sol.terms.len()).filter(|&i| sol.terms[i].mode.k == k).collect();
            let kk = (k * (k + n).saturating_sub(2)) as f64;
            let samples: Vec<Vec<(f64, f64)>> = terms
                .iter()
                .map(|&i| grid.nodes.iter().map(|&psi| sol.terms[i].mode.profile.eval(psi)).collect())
                .collect();
            let m = terms.len();
            let mut mass = vec![0.0; m * m];
            let mut stiff = vec![0.0; m * m];
            for a in 0..m {
                for c in 0..=a {
                    let mut s0 = 0.0;
                    let mut s1 = 0.0;
                    for (j, (&psi, &w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
                        let (pa, da) = samples[a][j];
                        let (pc, dc) = samples[c][j];
                        s0 += w * pa * pc;
                        let sn = psi.sin();
                        s1 += w * (da * dc + if kk > 0.0 { kk * pa * pc / (sn * sn) } else { 0.0 });
                    }
                    mass[a * m + c] = s0;
                    mass[c * m + a] = s0;
                    stiff[a * m + c] = s1;
                    stiff[c * m + a] = s1;
                }
            }
            channels.push(ChannelGram { terms, mass, stiff });
        }
        Self { sol: sol.clone(), radial_layout: radial, channels }
    }

    pub fn integrals(&self, r: f64) -> Result<Integrals> {
        let sol = &self.sol;
        check_radius(sol, r)?;
        let nb = sol.params.n as f64 + sol.params.b;
        let rn = r.powf(nb);
        let grid = RadialGrid::new(&sol.params, r, self.radial_layout)?;
        let mut out = Integrals { r, nb, ..Default::default() };
        for ch in &self.channels {
            let m = ch.terms.len();
            let series: Vec<(PowerSeries, PowerSeries)> =
                ch.terms.iter().map(|&i| (sol.terms[i].u_series(), sol.terms[i].v_series())).collect();
            // Radial moments of coefficient products.
            let mut fdfd = vec![0.0; m * m];
            let mut ff = vec![0.0; m * m];
            let mut gdgd = vec![0.0; m * m];
            let mut gg = vec![0.0; m * m];
            let mut fg = vec![0.0; m * m];
            let mut gfd = vec![0.0; m * m];
            let mut vals = vec![(0.0, 0.0, 0.0, 0.0); m];
            for (&rho, &w) in grid.nodes.iter().zip(&grid.weights) {
                for (v, (f, g)) in vals.iter_mut().zip(&series) {
                    let (fv, fd) = eval_series(f, rho);
                    let (gv, gd) = eval_series(g, rho);
                    *v = (fv, fd, gv, gd);
                }
                let inv2 = 1.0 / (rho * rho);
                for a in 0..m {
                    let (fa, fda, ga, gda) = vals[a];
                    for c in 0..m {
                        let (fc, fdc, gc, gdc) = vals[c];
                        let idx = a * m + c;
                        fdfd[idx] += w * fda * fdc;
                        ff[idx] += w * fa * fc * inv2;
                        gdgd[idx] += w * gda * gdc;
                        gg[idx] += w * ga * gc * inv2;
                        fg[idx] += w * fa * gc;
                        gfd[idx] += w * ga * rho * fdc;
                    }
                }
            }
            let shell: Vec<(f64, f64, f64, f64)> = series
                .iter()
                .map(|(f, g)| {
                    let (fv, fd) = eval_series(f, r);
                    let (gv, gd) = eval_series(g, r);
                    (fv, fd, gv, gd)
                })
                .collect();
            for a in 0..m {
                for c in 0..m {
                    let idx = a * m + c;
                    let (g0, g1) = (ch.mass[idx], ch.stiff[idx]);
                    out.grad_u += g0 * fdfd[idx] + g1 * ff[idx];
                    out.grad_v += g0 * gdgd[idx] + g1 * gg[idx];
                    out.uv += g0 * fg[idx];
                    out.v_radial_u += g0 * gfd[idx];
                    let (fa, fda, ga, gda) = shell[a];
                    let (fc, fdc, gc, gdc) = shell[c];
                    out.s_u2 += rn * g0 * fa * fc;
                    out.s_v2 += rn * g0 * ga * gc;
                    out.s_uv += rn * g0 * fa * gc;
                    out.s_un2 += rn * g0 * fda * fdc;
                    out.s_vn2 += rn * g0 * gda * gdc;
                    out.s_u_un += rn * g0 * fa * fdc;
                    out.s_v_vn += rn * g0 * ga * gdc;
                    out.s_grad_u += rn * (g0 * fda * fdc + g1 * fa * fc / (r * r));
                    out.s_grad_v += rn * (g0 * gda * gdc + g1 * ga * gc / (r * r));
                }
            }
        }
        Ok(out)
    }
}

/// Raw integrals by either path.
pub fn compute_integrals(sol: &SeparableSolution, r: f64, provenance: Provenance) -> Result<Integrals> {
    match provenance {
        Provenance::ClosedForm => closed_integrals(sol, r),
        Provenance::Quadrature => QuadratureEvaluator::new(sol).integrals(r),
    }
}

/// (D, H) for the system by the closed-form path.
#[allow(non_snake_case)]
pub fn compute_DH(sol: &SeparableSolution, r: f64) -> Result<(f64, f64)> {
    compute_DH_with(sol, r, Provenance::ClosedForm, Component::System)
}

#[allow(non_snake_case)]
pub fn compute_DH_with(sol: &SeparableSolution, r: f64, provenance: Provenance, component: Component) -> Result<(f64, f64)> {
    let i = compute_integrals(sol, r, provenance)?;
    Ok((i.d(component), i.h(component)))
}

/// N(r) = D(r)/H(r) by the closed-form path.
pub fn frequency(sol: &SeparableSolution, r: f64) -> Result<f64> {
    frequency_with(sol, r, Provenance::ClosedForm, Component::System)
}

pub fn frequency_with(sol: &SeparableSolution, r: f64, provenance: Provenance, component: Component) -> Result<f64> {
    let (d, h) = compute_DH_with(sol, r, provenance, component)?;
    if !(h > 0.0) {
        return Err(LabError::VanishingDenominator { r, h });
    }
    Ok(d / h)
}

/// (nu1, nu2) at r by the closed-form path.
pub fn nu_decomposition(sol: &SeparableSolution, r: f64) -> Result<(f64, f64)> {
    nu_decomposition_with(sol, r, Provenance::ClosedForm)
}

pub fn nu_decomposition_with(sol: &SeparableSolution, r: f64, provenance: Provenance) -> Result<(f64, f64)> {
    compute_integrals(sol, r, provenance)?.nu()
}

/// Pohozaev residuals with every term in closed form.
pub fn check_pohozaev(sol: &SeparableSolution, r: f64) -> Result<(f64, f64)> {
    check_pohozaev_with(sol, r, Provenance::ClosedForm)
}

/// With `Quadrature`, bulk integrals come from the tensor grid and the shell
/// terms stay in closed form, so the residual measures the bulk quadrature.
pub fn check_pohozaev_with(sol: &SeparableSolution, r: f64, provenance: Provenance) -> Result<(f64, f64)> {
    let closed = closed_integrals(sol, r)?;
    let ints = match provenance {
        Provenance::ClosedForm => closed,
        Provenance::Quadrature => QuadratureEvaluator::new(sol).integrals(r)?.with_shell(&closed),
    };
    Ok(ints.pohozaev())
}

/// Geometric radii r_max 10^{-i/per_decade}, i = 0..=decades*per_decade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub r_max: f64,
    pub decades: usize,
    pub per_decade: usize,
}

impl RadiusSchedule {
    pub fn new(r_max: f64) -> Self {
        Self { r_max, decades: 3, per_decade: 64 }
    }

    /// Ascending radii.
    pub fn radii(&self) -> Vec<f64> {
        let count = self.decades * self.per_decade;
        (0..=count)
            .rev()
            .map(|i| self.r_max * 10f64.powf(-(i as f64) / self.per_decade as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub r: f64,
    pub d: f64,
    pub h: f64,
    pub n: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// Exact H'(r) from the closed form of H, when available.
    pub dh: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub params: crate::params::WeightParams,
    pub provenance: Provenance,
    pub component: Component,
    pub records: Vec<TraceRecord>,
}

/// Samples (r, D, H, N, nu1, nu2) over a schedule. N is NaN where H = 0; the
/// nu pair is only defined for the system and is NaN for `UOnly`.
pub fn trace(sol: &SeparableSolution, schedule: &RadiusSchedule, provenance: Provenance, component: Component) -> Result<FrequencyTrace> {
    trace_at(sol, &schedule.radii(), provenance, component)
}

pub fn trace_at(sol: &SeparableSolution, radii: &[f64], provenance: Provenance, component: Component) -> Result<FrequencyTrace> {
    let quad = match provenance {
        Provenance::Quadrature => Some(QuadratureEvaluator::new(sol)),
        Provenance::ClosedForm => None,
    };
    let records: Result<Vec<TraceRecord>> = radii
        .par_iter()
        .map(|&r| {
            let ints = match &quad {
                Some(q) => q.integrals(r)?,
                None => closed_integrals(sol, r)?,
            };
            let (d, h) = (ints.d(component), ints.h(component));
            let n = if h > 0.0 { d / h } else { f64::NAN };
            let (nu1, nu2) = match component {
                Component::System if h > 0.0 => ints.nu()?,
                _ => (f64::NAN, f64::NAN),
            };
            let dh = match provenance {
                Provenance::ClosedForm => Some(closed_h_derivative(sol, r, component)),
                Provenance::Quadrature => None,
            };
            Ok(TraceRecord { r, d, h, n, nu1, nu2, dh })
        })
        .collect();
    let mut records = records?;
    records.sort_by(|a, b| a.r.partial_cmp(&b.r).expect("finite radii"));
    Ok(FrequencyTrace { params: sol.params, provenance, component, records })
}

/// H'(r) = 2 sum (phi phi' + phi~ phi~'), differentiated from H's closed form.
fn closed_h_derivative(sol: &SeparableSolution, r: f64, component: Component) -> f64 {
    sol.terms
        .iter()
        .map(|t| {
            let (f, df, g, dg) = t.radial(r);
            match component {
                Component::System => 2.0 * (f * df + g * dg),
                Component::UOnly => 2.0 * f * df,
            }
        })
        .sum()
}

/// Max relative residual of H' = 2D/r. Uses the exact H' when the trace has it,
/// central differences in log r otherwise.
#[allow(non_snake_case)]
pub fn check_H_derivative(trace: &FrequencyTrace) -> Result<f64> {
    if trace.records.len() >= 5 && trace.records.iter().all(|r| r.dh.is_some()) {
        Ok(trace
            .records
            .iter()
            .map(|rec| relative(rec.dh.expect("checked"), 2.0 * rec.d / rec.r))
            .fold(0.0, f64::max))
    } else {
        check_H_derivative_fd(trace)
    }
}

/// Max relative residual of H' = 2D/r with H' from central differences.
#[allow(non_snake_case)]
pub fn check_H_derivative_fd(trace: &FrequencyTrace) -> Result<f64> {
    let rec = &trace.records;
    if rec.len() < 5 {
        return Err(LabError::Input(format!("need at least 5 radii, got {}", rec.len())));
    }
    let mut worst: f64 = 0.0;
    for i in 1..rec.len() - 1 {
        let dh = log_central(rec[i - 1].r, rec[i].r, rec[i + 1].r, rec[i - 1].h, rec[i + 1].h);
        worst = worst.max(relative(dh, 2.0 * rec[i].d / rec[i].r));
    }
    Ok(worst)
}

/// f'(r) from a central difference in log r.
fn log_central(r0: f64, r1: f64, r2: f64, f0: f64, f2: f64) -> f64 {
    (f2 - f0) / (r2.ln() - r0.ln()) / r1
}

/// (r, N' by central differences, nu1 + nu2) at interior records.
pub fn frequency_derivative_check(trace: &FrequencyTrace) -> Vec<(f64, f64, f64)> {
    let rec = &trace.records;
    (1..rec.len().saturating_sub(1))
        .map(|i| {
            let dn = log_central(rec[i - 1].r, rec[i].r, rec[i + 1].r, rec[i - 1].n, rec[i + 1].n);
            (rec[i].r, dn, rec[i].nu1 + rec[i].nu2)
        })
        .collect()
}

/// Limit of the frequency as r -> 0 and its spectral match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLimit {
    pub gamma: f64,
    /// Exponent of the correction in N(r) = gamma + a r^q selected by the fit.
    pub correction_exponent: f64,
    pub matched_exponent: Option<f64>,
    /// Distinct eigenvalue index of the match.
    pub matched_l: Option<usize>,
    pub branch: Option<Branch>,
    /// Extrapolated lim r^{-2 gamma} H(r).
    pub h_limit: f64,
    /// Range of r^{-2 gamma} H(r) / h_limit over the last decade.
    pub h_ratio_band: (f64, f64),
    /// sup of r^{-2 gamma} H(r) over the trace.
    pub h_scaled_max: f64,
    /// min of H(r) / r^{2 gamma + 0.1} over the trace.
    pub sandwich_constant: f64,
}

impl FrequencyLimit {
    /// Turns a missing match into an error.
    pub fn require_match(self, candidates: &[f64]) -> Result<Self> {
        if self.matched_exponent.is_some() {
            return Ok(self);
        }
        let (closest, distance) = nearest(self.gamma, candidates);
        Err(LabError::UnmatchedExponent { gamma: self.gamma, closest, distance })
    }
}

fn nearest(x: f64, candidates: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for &c in candidates.iter().chain(candidates.iter().map(|c| c + 2.0).collect::<Vec<_>>().iter()) {
        let d = (x - c).abs();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

const MATCH_TOL: f64 = 1e-4;

/// Linear fit y = c + a x; returns (c, a, rms residual).
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c = my - a * mx;
    let res = (x.iter().zip(y).map(|(a_, b)| (b - c - a * a_).powi(2)).sum::<f64>() / n).sqrt();
    (c, a, res)
}

/// Fits y(r) = c + a r^q over the exponent set and keeps the best fit.
fn power_fit(r: &[f64], y: &[f64], exponents: &[f64]) -> (f64, f64) {
    let mut best = (y[0], f64::NAN, f64::INFINITY);
    for &q in exponents {
        let x: Vec<f64> = r.iter().map(|v| v.powf(q)).collect();
        let (c, _, res) = line_fit(&x, y);
        if res < best.2 * (1.0 - 1e-9) {
            best = (c, q, res);
        }
    }
    (best.0, best.1)
}

/// Extrapolates N(r) to r = 0 from the smallest decade of the trace and
/// matches the limit against {sigma_l} and {sigma_l + 2}. `sigmas` lists sigma^+
/// per distinct eigenvalue, indexed by l. The correction exponent is taken from
/// the spectral gaps, with the three-point estimate as a fallback.
pub fn frequency_limit(trace: &FrequencyTrace, sigmas: &[f64]) -> Result<FrequencyLimit> {
    let rec = &trace.records;
    let r_big = trace.params.r;
    let r_min = rec.first().map_or(f64::INFINITY, |x| x.r);
    if rec.len() < 8 || r_min > r_big / 200.0 * (1.0 + 1e-12) {
        return Err(LabError::Input(format!("trace must reach r <= R/200 = {}", r_big / 200.0)));
    }
    if let Some(bad) = rec.iter().find(|x| !(x.h > 0.0)) {
        return Err(LabError::VanishingDenominator { r: bad.r, h: bad.h });
    }
    let last: Vec<&TraceRecord> = rec.iter().filter(|x| x.r <= 10.0 * r_min * (1.0 + 1e-12)).collect();
    if last.len() < 4 {
        return Err(LabError::Input("too few radii on the smallest decade".into()));
    }
    let rs: Vec<f64> = last.iter().map(|x| x.r).collect();
    let ns: Vec<f64> = last.iter().map(|x| x.n).collect();
    let g0 = ns[0];
    let mut exps: Vec<f64> = vec![2.0, 4.0];
    for &s in sigmas {
        for c in [s, s + 2.0] {
            if c - g0 > 0.05 {
                exps.push(2.0 * (c - g0));
            }
        }
    }
    // Three-point estimate from the ends and middle of the decade.
    let (i0, i1, i2) = (0, rs.len() / 2, rs.len() - 1);
    if rs[i2] / rs[i1] > 1.0 && (ns[i1] - ns[i0]).abs() > 1e-14 && (ns[i2] - ns[i1]).abs() > 1e-14 {
        let ratio = (ns[i2] - ns[i1]) / (ns[i1] - ns[i0]);
        let q = ratio.abs().ln() / (rs[i2] / rs[i1]).ln();
        if q.is_finite() && q > 0.0 {
            exps.push(q);
        }
    }
    let (gamma, q) = power_fit(&rs, &ns, &exps);

    let mut matched: Option<(f64, usize, Branch, f64)> = None;
    for (l, &s) in sigmas.iter().enumerate() {
        for (c, br) in [(s, Branch::Sigma), (s + 2.0, Branch::SigmaPlusTwo)] {
            let d = (gamma - c).abs();
            let better = match matched {
                None => true,
                // Prefer the plain branch when both coincide.
                Some((_, _, b0, d0)) => d < d0 - 1e-12 || (d <= d0 + 1e-12 && b0 == Branch::SigmaPlusTwo && br == Branch::Sigma),
            };
            if d <= MATCH_TOL && better {
                matched = Some((c, l, br, d));
            }
        }
    }

    let scaled: Vec<f64> = rec.iter().map(|x| x.h * x.r.powf(-2.0 * gamma)).collect();
    let last_scaled: Vec<f64> = last.iter().map(|x| x.h * x.r.powf(-2.0 * gamma)).collect();
    let mut hexps = vec![2.0];
    if q.is_finite() {
        hexps.push(q);
    }
    let (h_limit, _) = power_fit(&rs, &last_scaled, &hexps);
    let band = last_scaled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v / h_limit), hi.max(v / h_limit))
    });
    let sandwich = rec.iter().map(|x| x.h / x.r.powf(2.0 * gamma + 0.1)).fold(f64::INFINITY, f64::min);
    Ok(FrequencyLimit {
        gamma,
        correction_exponent: q,
        matched_exponent: matched.map(|m| m.0),
        matched_l: matched.map(|m| m.1),
        branch: matched.map(|m| m.2),
        h_limit,
        h_ratio_band: band,
        h_scaled_max: scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        sandwich_constant: sandwich,
    })
}

/// Smallest C1 + C3 with C1, C3 >= 0 and |nu2| <= C1 N + C3 r at every record.
pub fn fit_nu2_bound(trace: &FrequencyTrace) -> (f64, f64) {
    let pts: Vec<(f64, f64, f64)> = trace
        .records
        .iter()
        .filter(|x| x.nu2.is_finite() && x.n.is_finite())
        .map(|x| (x.nu2.abs(), x.n, x.r))
        .collect();
    let c3_for = |c1: f64| pts.iter().map(|&(v, n, r)| ((v - c1 * n) / r).max(0.0)).fold(0.0, f64::max);
    let mut best = (0.0, c3_for(0.0));
    for &(v, n, _) in &pts {
        if n > 0.0 {
            let c1 = v / n;
            let c3 = c3_for(c1);
            if c1 + c3 < best.0 + best.1 {
                best = (c1, c3);
            }
        }
    }
    best
}
