//! Weighted eigenvalue problem on the upper half sphere S^N_+ with weight
//! theta_{N+1}^b and the weighted Neumann condition on the equator.
//!
//! Separating Y = P(psi) Z_k(omega), with Z_k a spherical harmonic of degree k
//! on S^{N-1}, gives for each k the Sturm-Liouville problem
//!   -(w P')' + k(k+N-2) w sin^{-2}(psi) P = mu w P,  w = sin^{N-1} psi cos^b psi
//! on (0, pi/2). It is discretized by cell-centered flux-form differences with
//! exact cell masses, reduced to a symmetric tridiagonal matrix and solved by
//! bisection and inverse iteration. Three nested grids give a Richardson
//! extrapolated eigenvalue and an observed convergence order.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::params::{sphere_area, WeightParams};
use crate::quadrature::{gauss_jacobi_unit, gauss_legendre, measure, AngularGrid1D};
use crate::special_functions::gamma;
use crate::tridiag::SymTridiag;

const MERGE_TOL: f64 = 1e-8;

/// Default number of cells on the coarsest of the three nested grids.
pub const DEFAULT_RESOLUTION: usize = 2048;

/// Eigenvector of one channel sampled at cell centers.
#[derive(Debug, Clone)]
pub struct AngularProfile {
    /// Cell centers with exact cell masses of the weight w.
    pub grid: AngularGrid1D,
    pub values: Vec<f64>,
    pub h: f64,
    /// Parity of the profile under psi -> -psi at the pole, (-1)^k.
    pub parity: f64,
}

impl AngularProfile {
    fn at(&self, j: isize) -> f64 {
        let m = self.values.len() as isize;
        if j < 0 {
            self.parity * self.values[(-1 - j) as usize]
        } else if j >= m {
            self.values[(2 * m - 1 - j) as usize]
        } else {
            self.values[j as usize]
        }
    }

    /// Cubic (four-point) interpolation of the profile and its derivative.
    pub fn eval(&self, psi: f64) -> (f64, f64) {
        let u = psi / self.h - 0.5;
        let i = u.floor();
        let x = u - i;
        let i = i as isize;
        let (p0, p1, p2, p3) = (self.at(i - 1), self.at(i), self.at(i + 1), self.at(i + 2));
        // Lagrange basis on nodes -1, 0, 1, 2.
        let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
        let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
        let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
        let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
        let d0 = -(3.0 * x * x - 6.0 * x + 2.0) / 6.0;
        let d1 = (3.0 * x * x - 4.0 * x - 1.0) / 2.0;
        let d2 = -(3.0 * x * x - 2.0 * x - 2.0) / 2.0;
        let d3 = (3.0 * x * x - 1.0) / 6.0;
        let v = l0 * p0 + l1 * p1 + l2 * p2 + l3 * p3;
        let dv = (d0 * p0 + d1 * p1 + d2 * p2 + d3 * p3) / self.h;
        (v, dv)
    }

    pub fn value(&self, psi: f64) -> f64 {
        self.eval(psi).0
    }

    /// Value on the equator psi = pi/2, using evenness in pi/2 - psi.
    pub fn equator(&self) -> f64 {
        let m = self.values.len();
        (9.0 * self.values[m - 1] - self.values[m - 2]) / 8.0
    }
}

/// One eigenpair of the half-sphere problem.
#[derive(Debug, Clone)]
pub struct SpectralMode {
    /// Index of the distinct eigenvalue this mode belongs to.
    pub l: usize,
    /// Degree of the spherical harmonic factor on S^{N-1}.
    pub k: usize,
    /// Position within the channel k (0 = lowest).
    pub index: usize,
    /// Richardson-extrapolated eigenvalue.
    pub mu: f64,
    /// Eigenvalue on the finest grid.
    pub mu_discrete: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// Total multiplicity of the distinct eigenvalue mu_l.
    pub multiplicity: usize,
    /// Dimension of the degree-k harmonics on S^{N-1}.
    pub harmonic_dim: usize,
    /// Observed convergence order from the three grids, when measurable.
    pub observed_order: Option<f64>,
    pub profile: AngularProfile,
}

/// Roots of sigma (sigma + N + b - 1) = mu.
pub fn sigma_exponents(params: &WeightParams, mu: f64) -> Result<(f64, f64)> {
    if !(mu >= 0.0) {
        return Err(LabError::Domain(format!("eigenvalue {mu} must be nonnegative")));
    }
    let c = params.nb1() / 2.0;
    let root = (c * c + mu).sqrt();
    let plus = mu / (c + root);
    let minus = -c - root;
    Ok((if plus.is_nan() { 0.0 } else { plus }, minus))
}

/// K(N, b, l) = (sigma+2)(sigma+1) + (N+b)(sigma+2) - mu.
pub fn k_constant(params: &WeightParams, mode: &SpectralMode) -> Result<f64> {
    k_constant_from(params, mode.sigma_plus, mode.mu)
}

pub fn k_constant_from(params: &WeightParams, sigma: f64, mu: f64) -> Result<f64> {
    let nb = params.n as f64 + params.b;
    let k = (sigma + 2.0) * (sigma + 1.0) + nb * (sigma + 2.0) - mu;
    if k.abs() < 1e-9 {
        return Err(LabError::DegenerateResonance { k });
    }
    Ok(k)
}

/// Dimension of the space of degree-k spherical harmonics on S^{N-1}.
pub fn harmonic_dimension(n: usize, k: usize) -> usize {
    if n == 1 {
        return usize::from(k <= 1);
    }
    let binom = |a: isize, b: isize| -> usize {
        if a < b || b < 0 || a < 0 {
            return 0;
        }
        let mut r: u128 = 1;
        for i in 0..b {
            r = r * (a - i) as u128 / (i + 1) as u128;
        }
        r as usize
    };
    let (k, n) = (k as isize, n as isize);
    binom(k + n - 1, n - 1) - binom(k + n - 3, n - 1)
}

/// Normalized representative harmonic Z_k on S^{N-1}, returned as the value
/// and the tangential gradient at `omega`.
pub fn harmonic(n: usize, k: usize, omega: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; n];
    if k == 0 {
        return (1.0 / sphere_area(n).sqrt(), grad);
    }
    if n == 1 {
        return (omega[0] / 2f64.sqrt(), grad);
    }
    let c = (gamma(k as f64 + n as f64 / 2.0)
        / (std::f64::consts::PI.powf(n as f64 / 2.0) * gamma(k as f64 + 1.0)))
    .sqrt();
    // Re and Im of (w1 + i w2)^{k-1} and (w1 + i w2)^k.
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..k - 1 {
        let nr = re * omega[0] - im * omega[1];
        im = re * omega[1] + im * omega[0];
        re = nr;
    }
    let pk = re * omega[0] - im * omega[1];
    let kf = k as f64;
    grad[0] = kf * re;
    grad[1] = -kf * im;
    for (g, w) in grad.iter_mut().zip(omega) {
        *g -= kf * pk * w;
    }
    for g in grad.iter_mut() {
        *g *= c;
    }
    (c * pk, grad)
}

struct ChannelSolve {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    grid: AngularGrid1D,
    h: f64,
}

/// Exact cell integrals of w = sin^{N-1} psi cos^b psi on a uniform grid.
fn cell_masses(n: usize, b: f64, m: usize) -> Vec<f64> {
    cell_integrals(n as i32 - 1, b, m)
}

/// Cell integrals of sin^p psi cos^b psi: Gauss-Jacobi in the distance to the
/// equator on the four cells nearest it, 10-point Gauss-Legendre elsewhere,
/// and the midpoint value on the pole cell when p < 0.
fn cell_integrals(p: i32, b: f64, m: usize) -> Vec<f64> {
    let h = FRAC_PI_2 / m as f64;
    let (gx, gw) = gauss_legendre(10);
    let (jx, jw) = gauss_jacobi_unit(10, b);
    // int_0^d tau^b cos^p(tau) sinc(tau)^b d tau, tau measured from the equator.
    let near = |d: f64| -> f64 {
        jx.iter()
            .zip(&jw)
            .map(|(x, w)| {
                let tau = d * x;
                let sinc = if tau == 0.0 { 1.0 } else { tau.sin() / tau };
                w * tau.cos().powi(p) * sinc.powf(b)
            })
            .sum::<f64>()
            * d.powf(b + 1.0)
    };
    let edge = 4.min(m);
    let dens = |psi: f64| psi.sin().powi(p) * psi.cos().powf(b);
    (0..m)
        .map(|j| {
            let from_equator = m - 1 - j;
            if j == 0 && p < 0 {
                dens(0.5 * h) * h
            } else if from_equator < edge {
                let hi = (from_equator + 1) as f64 * h;
                let lo = from_equator as f64 * h;
                near(hi) - if from_equator == 0 { 0.0 } else { near(lo) }
            } else {
                let a = j as f64 * h;
                gx.iter()
                    .zip(&gw)
                    .map(|(x, w)| w * 0.5 * h * dens(a + 0.5 * h * (1.0 + x)))
                    .sum()
            }
        })
        .collect()
}

fn solve_channel(params: &WeightParams, k: usize, count: usize, m: usize, vectors: bool) -> Result<ChannelSolve> {
    let (n, b) = (params.n, params.b);
    let h = FRAC_PI_2 / m as f64;
    let mass = cell_masses(n, b, m);
    let centers: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * h).collect();
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for f in 1..m {
        let a = measure(n, b, f as f64 * h) / (h * h);
        diag[f - 1] += a;
        diag[f] += a;
        off[f - 1] = -a;
    }
    if n == 1 && k == 1 {
        // Odd modes vanish at the pole: ghost value -P_0 across psi = 0.
        diag[0] += 2.0 * measure(n, b, 0.0) / (h * h);
    }
    let mut diag: Vec<f64> = diag.iter().map(|d| d * h).collect();
    if n >= 2 && k >= 1 {
        let kk = (k * (k + n - 2)) as f64;
        let pot = cell_integrals(n as i32 - 3, b, m);
        for (d, v) in diag.iter_mut().zip(&pot) {
            *d += kk * v;
        }
    }
    let sd: Vec<f64> = diag.iter().zip(&mass).map(|(d, w)| d / w).collect();
    let se: Vec<f64> = (0..m - 1)
        .map(|j| off[j] * h / (mass[j] * mass[j + 1]).sqrt())
        .collect();
    let t = SymTridiag::new(sd, se)?;
    let values = t.lowest(count);
    let vecs = if vectors {
        values
            .iter()
            .map(|&mu| {
                let y = t.eigenvector(mu);
                let mut p: Vec<f64> = y.iter().zip(&mass).map(|(y, w)| y / w.sqrt()).collect();
                let eq = (9.0 * p[m - 1] - p[m - 2]) / 8.0;
                if eq < 0.0 {
                    p.iter_mut().for_each(|v| *v = -*v);
                }
                p
            })
            .collect()
    } else {
        Vec::new()
    };
    let grid = AngularGrid1D::from_parts(params, centers, mass)?;
    Ok(ChannelSolve { values, vectors: vecs, grid, h })
}

fn max_channel(n: usize, k_max: usize) -> usize {
    if n == 1 {
        k_max.min(1)
    } else {
        k_max
    }
}

/// Solves every channel k <= k_max for its `per_k` lowest eigenpairs on grids
/// of `resolution`, 2x and 4x cells, and merges them into distinct eigenvalues.
pub fn hemisphere_eigs(params: &WeightParams, k_max: usize, per_k: usize, resolution: usize) -> Result<Vec<SpectralMode>> {
    if resolution < 64 {
        return Err(LabError::Refinement { resolution, suggested: 64 });
    }
    if per_k == 0 {
        return Err(LabError::Input("per_k must be at least 1".into()));
    }
    if per_k * 8 > resolution {
        return Err(LabError::Refinement { resolution, suggested: per_k * 8 });
    }
    let kmax = max_channel(params.n, k_max);
    let channels: Vec<Result<Vec<SpectralMode>>> = (0..=kmax)
        .into_par_iter()
        .map(|k| channel_modes(params, k, per_k, resolution))
        .collect();
    let mut modes = Vec::new();
    for c in channels {
        modes.extend(c?);
    }
    let h = FRAC_PI_2 / resolution as f64;
    let top = modes.iter().map(|m| m.mu).fold(0.0, f64::max);
    if top * h * h > 0.5 {
        let suggested = (resolution as f64 * (top * h * h / 0.5).sqrt()).ceil() as usize;
        return Err(LabError::Refinement { resolution, suggested: suggested.max(resolution + 1) });
    }
    merge(&mut modes, params.n);
    Ok(modes)
}

fn channel_modes(params: &WeightParams, k: usize, per_k: usize, m: usize) -> Result<Vec<SpectralMode>> {
    let c1 = solve_channel(params, k, per_k, m, false)?;
    let c2 = solve_channel(params, k, per_k, 2 * m, false)?;
    let c4 = solve_channel(params, k, per_k, 4 * m, true)?;
    let mut out = Vec::with_capacity(per_k);
    for i in 0..c4.values.len() {
        let (a, b, c) = (c1.values[i], c2.values[i], c4.values[i]);
        let mut mu = c + (c - b) / 3.0;
        let scale = c.abs().max(1.0);
        let mut order = if (a - b).abs() > 1e-12 * scale && (b - c).abs() > 1e-13 * scale {
            Some(((a - b) / (b - c)).abs().log2())
        } else {
            None
        };
        // Constants are exact eigenfunctions; bisection only resolves 0 to the
        // matrix scale times epsilon, which sigma = sqrt(mu) amplifies when N + b = 1.
        if (k == 0 && i == 0 && mu.abs() < 1e-6) || mu.abs() < 1e-12 {
            mu = 0.0;
            order = None;
        }
        let mu = mu.max(0.0);
        let (sp, sm) = sigma_exponents(params, mu)?;
        out.push(SpectralMode {
            l: 0,
            k,
            index: i,
            mu,
            mu_discrete: c,
            sigma_plus: sp,
            sigma_minus: sm,
            multiplicity: 0,
            harmonic_dim: harmonic_dimension(params.n, k),
            observed_order: order,
            profile: AngularProfile {
                grid: c4.grid.clone(),
                values: c4.vectors[i].clone(),
                h: c4.h,
                parity: if k.is_multiple_of(2) { 1.0 } else { -1.0 },
            },
        });
    }
    Ok(out)
}

fn merge(modes: &mut [SpectralMode], _n: usize) {
    modes.sort_by(|a, b| a.mu.partial_cmp(&b.mu).expect("finite").then(a.k.cmp(&b.k)));
    let mut l = 0;
    let mut start = 0;
    for i in 0..modes.len() {
        if i > start {
            let base = modes[start].mu;
            if (modes[i].mu - base).abs() > MERGE_TOL * base.abs().max(1.0) {
                finish_group(modes, start, i, l);
                l += 1;
                start = i;
            }
        }
    }
    if !modes.is_empty() {
        let end = modes.len();
        finish_group(modes, start, end, l);
    }
}

fn finish_group(modes: &mut [SpectralMode], start: usize, end: usize, l: usize) {
    let mult: usize = modes[start..end].iter().map(|m| m.harmonic_dim).sum();
    for m in &mut modes[start..end] {
        m.l = l;
        m.multiplicity = mult;
    }
}

/// The spectrum up to the `count`-th distinct eigenvalue, with channel and
/// per-channel counts chosen so that no eigenvalue below it is missed.
pub fn hemisphere_spectrum(params: &WeightParams, count: usize, resolution: usize) -> Result<Vec<SpectralMode>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut k_max = count;
    let mut per_k = count;
    loop {
        let modes = hemisphere_eigs(params, k_max, per_k, resolution)?;
        let kmax = max_channel(params.n, k_max);
        let distinct = modes.iter().map(|m| m.l).max().map_or(0, |l| l + 1);
        if distinct >= count {
            let cutoff = modes.iter().find(|m| m.l == count - 1).expect("present").mu;
            let channel_top = (0..=kmax)
                .map(|k| modes.iter().filter(|m| m.k == k).map(|m| m.mu).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            // Channel k starts at sigma = k, so its lowest eigenvalue is k(k + N + b - 1).
            let next_channel = if params.n == 1 {
                f64::INFINITY
            } else {
                let k = (kmax + 1) as f64;
                k * (k + params.nb1())
            };
            let slack = MERGE_TOL * cutoff.max(1.0);
            if (cutoff + slack < channel_top || per_k >= resolution / 8) && cutoff < next_channel {
                return Ok(modes.into_iter().filter(|m| m.l < count).collect());
            }
        }
        if per_k * 2 * 8 > resolution {
            return Err(LabError::Refinement { resolution, suggested: per_k * 16 });
        }
        per_k *= 2;
        k_max *= 2;
    }
}

/// Distinct eigenvalues (one entry per l) from a merged mode list.
pub fn distinct(modes: &[SpectralMode]) -> Vec<&SpectralMode> {
    let mut out: Vec<&SpectralMode> = Vec::new();
    for m in modes {
        if out.last().is_none_or(|p| p.l != m.l) {
            out.push(m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_examples() {
        let p = WeightParams::from_b(0.5, 3, 1.0).unwrap();
        let (a, b) = sigma_exponents(&p, 0.0).unwrap();
        assert_eq!(a, 0.0);
        assert!((b + 2.5).abs() < 1e-15);
        let (a, b) = sigma_exponents(&p, 3.5).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b + 3.5).abs() < 1e-15);
        assert!(sigma_exponents(&p, -1.0).is_err());
        for mu in [0.3, 2.0, 17.5, 300.0] {
            let (s, _) = sigma_exponents(&p, mu).unwrap();
            assert!((s * (s + p.nb1()) - mu).abs() < 1e-12 * mu.max(1.0));
        }
    }

    #[test]
    fn k_examples() {
        let p = WeightParams::from_b(0.5, 3, 1.0).unwrap();
        assert!((k_constant_from(&p, 0.0, 0.0).unwrap() - 9.0).abs() < 1e-14);
        assert!((k_constant_from(&p, 1.0, 3.5).unwrap() - 13.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_dimensions() {
        assert_eq!(harmonic_dimension(2, 0), 1);
        assert_eq!(harmonic_dimension(2, 3), 2);
        assert_eq!(harmonic_dimension(3, 2), 5);
        assert_eq!(harmonic_dimension(4, 1), 4);
        assert_eq!(harmonic_dimension(1, 1), 1);
        assert_eq!(harmonic_dimension(1, 2), 0);
    }

    #[test]
    fn half_circle_spectrum() {
        let p = WeightParams::from_b(0.0, 1, 1.0).unwrap();
        let modes = hemisphere_spectrum(&p, 5, 512).unwrap();
        let mus: Vec<f64> = distinct(&modes).iter().map(|m| m.mu).collect();
        for (mu, exact) in mus.iter().zip([0.0, 1.0, 4.0, 9.0, 16.0]) {
            assert!((mu - exact).abs() < 1e-6, "{mu} vs {exact}");
        }
    }

    #[test]
    fn low_resolution_is_refused() {
        let p = WeightParams::from_b(0.0, 3, 1.0).unwrap();
        assert!(matches!(hemisphere_eigs(&p, 2, 2, 32), Err(LabError::Refinement { .. })));
    }
}
