//! Hardy, Hardy-Rellich and trace-Sobolev inequalities checked on families of
//! smooth test fields in the weighted half-space.
//!
//! Test fields depend on z = (x, t) only through |x| and t, so every integral
//! reduces to a radial times polar-angle quadrature with the t^b dz measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hemisphere_spectrum::{hemisphere_spectrum, SpectralMode};
use crate::params::{sphere_area, WeightParams};
use crate::quadrature::{weighted_line, AngularGrid1D, GradedLayout};

/// Relative tolerance for a reported violation.
pub const VIOLATION_TOL: f64 = 1e-12;
const MODE_RESOLUTION: usize = 512;

/// A test field U(x, t) that is radial in x.
pub trait TestField: Sync {
    /// (U, |∇U|^2, Δ_b U) at the polar point rho (cos psi on the t axis).
    fn sample(&self, rho: f64, psi: f64) -> [f64; 3];
    /// U at |x| = x and height t.
    fn value(&self, x: f64, t: f64) -> f64;
    /// Radius beyond which the field is negligible, if it decays.
    fn extent(&self) -> Option<f64>;
    fn label(&self) -> String;
}

/// P(p, q) exp(-beta p - gamma (q - q0)^2) with p = |x|^2, q = t^2 and P a
/// quadratic polynomial with coefficients [1, p, q, p^2, pq, q^2].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalField {
    pub dim: usize,
    pub b: f64,
    pub poly: [f64; 6],
    pub beta: f64,
    pub gamma: f64,
    pub q0: f64,
}

impl ZonalField {
    pub fn constant(params: &WeightParams, c: f64) -> Self {
        Self { dim: params.n, b: params.b, poly: [c, 0.0, 0.0, 0.0, 0.0, 0.0], beta: 0.0, gamma: 0.0, q0: 0.0 }
    }

    pub fn bump(params: &WeightParams, amplitude: f64, beta: f64, gamma: f64, q0: f64) -> Self {
        Self { dim: params.n, b: params.b, poly: [amplitude, 0.0, 0.0, 0.0, 0.0, 0.0], beta, gamma, q0 }
    }

    /// The field z -> U(lambda z).
    pub fn dilated(&self, lambda: f64) -> Self {
        let l2 = lambda * lambda;
        let [c0, cp, cq, cpp, cpq, cqq] = self.poly;
        Self {
            poly: [c0, cp * l2, cq * l2, cpp * l2 * l2, cpq * l2 * l2, cqq * l2 * l2],
            beta: self.beta * l2,
            gamma: self.gamma * l2 * l2,
            q0: self.q0 / l2,
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.poly.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// G, G_p, G_q, G_pp, G_qq.
    fn derivs(&self, p: f64, q: f64) -> [f64; 5] {
        let [c0, cp, cq, cpp, cpq, cqq] = self.poly;
        let pv = c0 + cp * p + cq * q + cpp * p * p + cpq * p * q + cqq * q * q;
        let pp = cp + 2.0 * cpp * p + cpq * q;
        let pq = cq + cpq * p + 2.0 * cqq * q;
        let ppp = 2.0 * cpp;
        let pqq = 2.0 * cqq;
        let ep = -self.beta;
        let eq = -2.0 * self.gamma * (q - self.q0);
        let eqq = -2.0 * self.gamma;
        let e = (-self.beta * p - self.gamma * (q - self.q0).powi(2)).exp();
        [
            pv * e,
            (pp + pv * ep) * e,
            (pq + pv * eq) * e,
            (ppp + 2.0 * pp * ep + pv * ep * ep) * e,
            (pqq + 2.0 * pq * eq + pv * (eq * eq + eqq)) * e,
        ]
    }
}

impl TestField for ZonalField {
    fn sample(&self, rho: f64, psi: f64) -> [f64; 3] {
        let (x, t) = (rho * psi.sin(), rho * psi.cos());
        let (p, q) = (x * x, t * t);
        let [g, gp, gq, gpp, gqq] = self.derivs(p, q);
        let grad2 = 4.0 * p * gp * gp + 4.0 * q * gq * gq;
        let lap = 2.0 * self.dim as f64 * gp + 4.0 * p * gpp + 2.0 * (1.0 + self.b) * gq + 4.0 * q * gqq;
        [g, grad2, lap]
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        self.derivs(x * x, t * t)[0]
    }

    fn extent(&self) -> Option<f64> {
        if !(self.beta > 0.0 && self.gamma > 0.0) {
            return None;
        }
        // Either p or q is at least rho^2 / 2, so the exponent is at least 60.
        let r2 = (120.0 / self.beta).max(2.0 * (self.q0.max(0.0) + (60.0 / self.gamma).sqrt()));
        Some(r2.sqrt())
    }

    fn label(&self) -> String {
        format!("zonal(beta={:.4}, gamma={:.4}, q0={:.4})", self.beta, self.gamma, self.q0)
    }
}

/// A zonal hemisphere mode times a radial factor: U = A rho^sigma e^{-rho^2/w^2} Theta(psi),
/// or the pure homogeneous mode when `width` is None.
#[derive(Debug, Clone)]
pub struct ModeField {
    pub dim: usize,
    pub b: f64,
    pub mode: SpectralMode,
    pub amplitude: f64,
    pub width: Option<f64>,
}

impl ModeField {
    pub fn new(params: &WeightParams, mode: SpectralMode, amplitude: f64, width: Option<f64>) -> Result<Self> {
        if mode.k != 0 {
            return Err(LabError::Input(format!("mode {} is not zonal (k = {})", mode.l, mode.k)));
        }
        Ok(Self { dim: params.n, b: params.b, mode, amplitude, width })
    }

    /// f, f', f''.
    fn radial(&self, rho: f64) -> [f64; 3] {
        let s = self.mode.sigma_plus;
        let pw = |e: f64| if e == 0.0 { 1.0 } else { rho.powf(e) };
        let (m0, m1, m2) = (pw(s), s * pw(s - 1.0), s * (s - 1.0) * pw(s - 2.0));
        match self.width {
            None => [self.amplitude * m0, self.amplitude * m1, self.amplitude * m2],
            Some(w) => {
                let c = (-rho * rho / (w * w)).exp();
                let c1 = -2.0 * rho / (w * w) * c;
                let c2 = (4.0 * rho * rho / (w * w) - 2.0) / (w * w) * c;
                let a = self.amplitude;
                [a * m0 * c, a * (m1 * c + m0 * c1), a * (m2 * c + 2.0 * m1 * c1 + m0 * c2)]
            }
        }
    }
}

impl TestField for ModeField {
    fn sample(&self, rho: f64, psi: f64) -> [f64; 3] {
        let [f, f1, f2] = self.radial(rho);
        let (th, dth) = self.mode.profile.eval(psi);
        let nb = self.dim as f64 + self.b;
        let grad2 = f1 * f1 * th * th + f * f * dth * dth / (rho * rho);
        let lap = (f2 + nb * f1 / rho - self.mode.mu * f / (rho * rho)) * th;
        [f * th, grad2, lap]
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        let rho = x.hypot(t);
        self.radial(rho)[0] * self.mode.profile.value(x.atan2(t))
    }

    fn extent(&self) -> Option<f64> {
        self.width.map(|w| w * 70f64.sqrt() + 1.0)
    }

    fn label(&self) -> String {
        format!("mode(l={}, sigma={}, width={:?})", self.mode.l, self.mode.sigma_plus, self.width)
    }
}

#[derive(Debug, Clone)]
pub enum Field {
    Zonal(ZonalField),
    Mode(ModeField),
}

impl TestField for Field {
    fn sample(&self, rho: f64, psi: f64) -> [f64; 3] {
        match self {
            Field::Zonal(f) => f.sample(rho, psi),
            Field::Mode(f) => f.sample(rho, psi),
        }
    }
    fn value(&self, x: f64, t: f64) -> f64 {
        match self {
            Field::Zonal(f) => f.value(x, t),
            Field::Mode(f) => f.value(x, t),
        }
    }
    fn extent(&self) -> Option<f64> {
        match self {
            Field::Zonal(f) => f.extent(),
            Field::Mode(f) => f.extent(),
        }
    }
    fn label(&self) -> String {
        match self {
            Field::Zonal(f) => f.label(),
            Field::Mode(f) => f.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Gaussian bumps with random widths and offsets in t^2.
    Bumps,
    /// Random quadratic polynomials in (|x|^2, t^2) times a Gaussian cutoff.
    Polynomials,
    /// Zonal hemisphere modes times a radial Gaussian cutoff.
    Modes,
    /// Cycles through the three kinds above.
    Mixed,
    /// Constant fields.
    Constants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub count: usize,
    pub seed: u64,
}

impl TestFamily {
    pub fn new(kind: FamilyKind, count: usize, seed: u64) -> Self {
        Self { kind, count, seed }
    }

    /// Deterministic members for `params`.
    pub fn generate(&self, params: &WeightParams) -> Result<Vec<Field>> {
        if self.count == 0 {
            return Err(LabError::Input("test family is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let needs_modes = matches!(self.kind, FamilyKind::Modes | FamilyKind::Mixed);
        let zonal: Vec<SpectralMode> = if needs_modes {
            hemisphere_spectrum(params, 12, MODE_RESOLUTION)?
                .into_iter()
                .filter(|m| m.k == 0)
                .take(4)
                .collect()
        } else {
            Vec::new()
        };
        let mut out = Vec::with_capacity(self.count);
        for i in 0..self.count {
            let kind = match self.kind {
                FamilyKind::Mixed => [FamilyKind::Bumps, FamilyKind::Polynomials, FamilyKind::Modes][i % 3],
                k => k,
            };
            let field = match kind {
                FamilyKind::Bumps => Field::Zonal(ZonalField::bump(
                    params,
                    rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                    rng.gen_range(0.5..4.0),
                    rng.gen_range(0.5..4.0),
                    rng.gen_range(0.0..1.0),
                )),
                FamilyKind::Polynomials => {
                    let mut f = ZonalField::bump(params, 1.0, rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0), 0.0);
                    for c in f.poly.iter_mut() {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                    Field::Zonal(f)
                }
                FamilyKind::Modes => {
                    let mode = zonal[rng.gen_range(0..zonal.len())].clone();
                    Field::Mode(ModeField::new(params, mode, rng.gen_range(0.5..2.0), Some(rng.gen_range(0.5..2.0)))?)
                }
                FamilyKind::Constants => Field::Zonal(ZonalField::constant(params, rng.gen_range(0.5..2.0))),
                FamilyKind::Mixed => unreachable!("resolved above"),
            };
            out.push(field);
        }
        Ok(out)
    }
}

/// Quadrature layouts for the radial and polar-angle factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationLayout {
    pub radial: GradedLayout,
    pub angular: GradedLayout,
}

impl Default for IntegrationLayout {
    fn default() -> Self {
        Self {
            radial: GradedLayout { uniform_panels: 24, order: 8, ratio: 0.5, levels: 10, graded_fraction: 0.1 },
            angular: GradedLayout { uniform_panels: 16, order: 8, ratio: 0.5, levels: 6, graded_fraction: 0.1 },
        }
    }
}

impl IntegrationLayout {
    pub fn refined(&self) -> Self {
        Self { radial: self.radial.refined(), angular: self.angular.refined() }
    }
}

/// RHS - LHS of an inequality together with the size of its terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub value: f64,
    /// Sum of the absolute values of the terms.
    pub scale: f64,
    pub terms: Vec<f64>,
}

impl Margin {
    fn from_terms(value: f64, terms: Vec<f64>) -> Self {
        let scale = terms.iter().map(|t| t.abs()).sum();
        Self { value, scale, terms }
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 { self.value / self.scale } else { 0.0 }
    }

    pub fn violated(&self) -> bool {
        self.value < -VIOLATION_TOL * self.scale
    }
}

/// Integrals of rho^{e_m} times t^b U^2, t^b |∇U|^2 and t^b (Δ_b U)^2 over
/// the half ball of `radius`, with the extra powers e = `powers`. The radial
/// rule carries rho^{N+b+shift}, so `shift` must absorb any singular power.
fn moments<F: TestField + ?Sized>(
    params: &WeightParams,
    field: &F,
    radius: f64,
    shift: f64,
    powers: [i32; 3],
    layout: &IntegrationLayout,
) -> Result<[f64; 3]> {
    let ang = AngularGrid1D::with_layout(params, layout.angular);
    let (nodes, weights) = weighted_line(params.n as f64 + params.b + shift, radius, layout.radial)?;
    let mut out = [0.0; 3];
    for (rho, wr) in nodes.iter().zip(&weights) {
        let mut inner = [0.0; 3];
        for (psi, wa) in ang.nodes.iter().zip(&ang.weights) {
            let s = field.sample(*rho, *psi);
            inner[0] += wa * s[0] * s[0];
            inner[1] += wa * s[1];
            inner[2] += wa * s[2] * s[2];
        }
        for m in 0..3 {
            out[m] += wr * rho.powi(powers[m]) * inner[m];
        }
    }
    let area = sphere_area(params.n);
    Ok(out.map(|v| v * area))
}

/// Integral of t^b U^2 over S_r^+.
fn shell_u2<F: TestField + ?Sized>(params: &WeightParams, field: &F, r: f64, layout: &IntegrationLayout) -> f64 {
    let ang = AngularGrid1D::with_layout(params, layout.angular);
    let inner: f64 = ang.nodes.iter().zip(&ang.weights).map(|(psi, w)| w * field.sample(r, *psi)[0].powi(2)).sum();
    sphere_area(params.n) * r.powf(params.n as f64 + params.b) * inner
}

/// Margin of a^2 ∫_B t^b U^2 ≤ ∫_B t^b |∇U|^2 + a ∫_S t^b U^2 with
/// a = (N+b-1)/(2r), on B_r^+.
pub fn check_hardy_trace<F: TestField + ?Sized>(params: &WeightParams, field: &F, r: f64) -> Result<Margin> {
    check_hardy_trace_with(params, field, r, &IntegrationLayout::default())
}

pub fn check_hardy_trace_with<F: TestField + ?Sized>(
    params: &WeightParams,
    field: &F,
    r: f64,
    layout: &IntegrationLayout,
) -> Result<Margin> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::Domain(format!("radius {r} must be positive")));
    }
    let a = params.nb1() / (2.0 * r);
    let [u2, g2, _] = moments(params, field, r, 0.0, [0, 0, 0], layout)?;
    let s2 = shell_u2(params, field, r, layout);
    let terms = vec![g2, a * s2, a * a * u2];
    Ok(Margin::from_terms(g2 + a * s2 - a * a * u2, terms))
}

/// Margin of the Hardy-Rellich inequality
/// ∫ t^b (Δ_b U)^2 ≥ (N-2s)^2 ∫ t^b U^2/|z|^4 + 2(N-2s) ∫ t^b |∇U|^2/|z|^2
/// over the half-space. Requires N > 2s and a decaying field.
pub fn check_hardy_rellich<F: TestField + ?Sized>(params: &WeightParams, field: &F) -> Result<Margin> {
    check_hardy_rellich_with(params, field, &IntegrationLayout::default())
}

pub fn check_hardy_rellich_with<F: TestField + ?Sized>(
    params: &WeightParams,
    field: &F,
    layout: &IntegrationLayout,
) -> Result<Margin> {
    let c = params.n as f64 - 2.0 * params.s;
    if !(c > 0.0) {
        return Err(LabError::Regime(format!("Hardy-Rellich needs N > 2s, got N = {}, s = {}", params.n, params.s)));
    }
    let extent = field
        .extent()
        .ok_or_else(|| LabError::Input(format!("{} does not decay; Hardy-Rellich needs compact support", field.label())))?;
    let [u2, g2, l2] = moments(params, field, extent, -4.0, [0, 2, 4], layout)?;
    let terms = vec![l2, c * c * u2, 2.0 * c * g2];
    Ok(Margin::from_terms(l2 - c * c * u2 - 2.0 * c * g2, terms))
}

/// 2*(N, s-1) = 2N / (N - 2(s-1)) = 2N / (N+b-1).
pub fn critical_exponent(params: &WeightParams) -> Result<f64> {
    let d = params.nb1();
    if !(d > 0.0) {
        return Err(LabError::Regime(format!("2* needs N + b - 1 > 0, got {d}")));
    }
    Ok(2.0 * params.n as f64 / d)
}

/// The trace u(x) = U(x, 0), extrapolated from three small t levels.
pub fn trace_value<F: TestField + ?Sized>(field: &F, x: f64, delta: f64) -> f64 {
    3.0 * field.value(x, delta) - 3.0 * field.value(x, 2.0 * delta) + field.value(x, 3.0 * delta)
}

/// [∫_B t^b |∇U|^2 + a ∫_S t^b U^2] / ||u||^2_{L^{2*}(B_r')}, or None if the
/// trace vanishes.
pub fn sobolev_ratio<F: TestField + ?Sized>(
    params: &WeightParams,
    field: &F,
    r: f64,
    layout: &IntegrationLayout,
) -> Result<Option<f64>> {
    let p = critical_exponent(params)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::Domain(format!("radius {r} must be positive")));
    }
    let a = params.nb1() / (2.0 * r);
    let [_, g2, _] = moments(params, field, r, 0.0, [0, 0, 0], layout)?;
    let num = g2 + a * shell_u2(params, field, r, layout);
    let (nodes, weights) = weighted_line(params.n as f64 - 1.0, r, layout.radial)?;
    let delta = 1e-4 * r;
    let lp: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * trace_value(field, *x, delta).abs().powf(p)).sum::<f64>()
        * sphere_area(params.n);
    if !(lp > 0.0) {
        return Ok(None);
    }
    Ok(Some(num / lp.powf(2.0 / p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    /// Minimum ratio over the members with a nonzero trace.
    pub constant: f64,
    pub exponent: f64,
    pub ratios: Vec<Option<f64>>,
    /// (member, reason) for skipped members.
    pub skipped: Vec<(usize, String)>,
}

/// Empirical lower-bound candidate for the trace Sobolev constant on B_r^+.
pub fn estimate_sobolev_trace_constant(params: &WeightParams, family: &TestFamily, r: f64) -> Result<SobolevEstimate> {
    let members = family.generate(params)?;
    estimate_sobolev_for(params, &members, r, &IntegrationLayout::default())
}

pub fn estimate_sobolev_for<F: TestField + Sync>(
    params: &WeightParams,
    members: &[F],
    r: f64,
    layout: &IntegrationLayout,
) -> Result<SobolevEstimate> {
    let exponent = critical_exponent(params)?;
    let ratios: Vec<Option<f64>> =
        members.par_iter().map(|f| sobolev_ratio(params, f, r, layout)).collect::<Result<_>>()?;
    let skipped = ratios
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| (i, "trace vanishes on B_r'".to_string()))
        .collect();
    let constant = ratios.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    if !constant.is_finite() {
        return Err(LabError::Input("every family member has a vanishing trace".into()));
    }
    Ok(SobolevEstimate { constant, exponent, ratios, skipped })
}

/// Results for one member at the base and refined layouts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberReport {
    pub label: String,
    pub hardy: Margin,
    pub hardy_refined: Margin,
    pub rellich: Option<Margin>,
    pub rellich_refined: Option<Margin>,
    pub sobolev: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub members: Vec<MemberReport>,
    pub violations: usize,
    pub worst_relative: f64,
    /// Largest relative change of a margin under one refinement.
    pub refinement_change: f64,
    /// Every margin keeps its sign under refinement.
    pub sign_stable: bool,
}

/// Runs all three checks on each member, at the given layout and once refined.
pub fn check_family(params: &WeightParams, family: &TestFamily, r: f64) -> Result<SuiteReport> {
    let members = family.generate(params)?;
    check_members(params, &members, r, &IntegrationLayout::default())
}

pub fn check_members<F: TestField + Sync>(
    params: &WeightParams,
    members: &[F],
    r: f64,
    layout: &IntegrationLayout,
) -> Result<SuiteReport> {
    let fine = layout.refined();
    let rellich_ok = params.n as f64 > 2.0 * params.s;
    let sob_ok = params.nb1() > 0.0;
    let reports: Vec<MemberReport> = members
        .par_iter()
        .map(|f| {
            let rel = |l: &IntegrationLayout| -> Result<Option<Margin>> {
                if rellich_ok && f.extent().is_some() { check_hardy_rellich_with(params, f, l).map(Some) } else { Ok(None) }
            };
            Ok(MemberReport {
                label: f.label(),
                hardy: check_hardy_trace_with(params, f, r, layout)?,
                hardy_refined: check_hardy_trace_with(params, f, r, &fine)?,
                rellich: rel(layout)?,
                rellich_refined: rel(&fine)?,
                sobolev: if sob_ok { sobolev_ratio(params, f, r, layout)? } else { None },
            })
        })
        .collect::<Result<_>>()?;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut change: f64 = 0.0;
    let mut stable = true;
    for m in &reports {
        let pairs = [(Some(&m.hardy), Some(&m.hardy_refined)), (m.rellich.as_ref(), m.rellich_refined.as_ref())];
        for (c, f) in pairs.into_iter() {
            if let (Some(c), Some(f)) = (c, f) {
                violations += c.violated() as usize + f.violated() as usize;
                worst = worst.min(c.relative()).min(f.relative());
                change = change.max((c.value - f.value).abs() / f.scale.max(f64::MIN_POSITIVE));
                // Margins at rounding level carry no sign.
                let tiny = 1e-12 * f.scale;
                if c.value.abs() > tiny && f.value.abs() > tiny && (c.value > 0.0) != (f.value > 0.0) {
                    stable = false;
                }
            }
        }
        if let Some(v) = m.sobolev {
            if !(v > 0.0) {
                violations += 1;
            }
        }
    }
    Ok(SuiteReport { members: reports, violations, worst_relative: worst, refinement_change: change, sign_stable: stable })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zonal_laplacian_matches_finite_differences() {
        let p = WeightParams::from_b(0.5, 3, 1.0).unwrap();
        let f = ZonalField { dim: 3, b: 0.5, poly: [1.0, 0.3, -0.2, 0.1, 0.05, -0.04], beta: 1.2, gamma: 0.8, q0: 0.3 };
        let (x, t) = (0.7, 0.4);
        let h = 1e-4;
        let u = |x: f64, t: f64| f.value(x, t);
        let uxx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
        let ux = (u(x + h, t) - u(x - h, t)) / (2.0 * h);
        let utt = (u(x, t + h) - 2.0 * u(x, t) + u(x, t - h)) / (h * h);
        let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        let lap = uxx + (p.n as f64 - 1.0) / x * ux + utt + p.b / t * ut;
        let rho = x.hypot(t);
        let s = f.sample(rho, x.atan2(t));
        assert!((s[2] - lap).abs() < 1e-6 * lap.abs().max(1.0), "{} vs {}", s[2], lap);
        assert!((s[1] - (ux * ux + ut * ut)).abs() < 1e-7);
    }

    #[test]
    fn family_is_reproducible() {
        let p = WeightParams::from_b(0.0, 4, 1.0).unwrap();
        let f = TestFamily::new(FamilyKind::Polynomials, 5, 7);
        let a = f.generate(&p).unwrap();
        let b = f.generate(&p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sample(0.4, 0.3), y.sample(0.4, 0.3));
        }
    }
}
