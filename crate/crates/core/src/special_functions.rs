//! Bessel functions of the first kind, their zeros, and the normalization
//! constants of the cylinder basis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::params::WeightParams;

const SERIES_SWITCH: f64 = 4.0;
const HANKEL_SWITCH: f64 = 25.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function (Lanczos, g = 7) with reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// A Bessel order restricted to |nu| < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.abs() < 1.0) {
            return Err(LabError::Domain(format!("Bessel order {nu} outside (-1, 1)")));
        }
        Ok(Self(nu))
    }

    /// The order -alpha used by the cylinder basis.
    pub fn for_params(p: &WeightParams) -> Self {
        Self(-p.alpha())
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// J_nu(t) for |nu| < 1.
pub fn bessel_j(nu: BesselOrder, t: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(LabError::Domain(format!("bessel_j needs t >= 0, got {t}")));
    }
    if t == 0.0 && nu.0 < 0.0 {
        return Err(LabError::Domain(
            "J_nu is singular at 0 for nu < 0; use bessel_h".into(),
        ));
    }
    Ok(bessel_j_real(nu.0, t))
}

/// h(t) = t^alpha J_{-alpha}(t), smooth at the origin.
pub fn bessel_h(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::Domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(LabError::Domain(format!("bessel_h needs t >= 0, got {t}")));
    }
    Ok(h_unchecked(alpha, t))
}

/// h'(t) = -t^alpha J_{1-alpha}(t).
pub fn bessel_h_prime(alpha: f64, t: f64) -> Result<f64> {
    bessel_h(alpha, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(-t.powf(alpha) * bessel_j_real(1.0 - alpha, t))
}

pub(crate) fn h_unchecked(alpha: f64, t: f64) -> f64 {
    if t <= SERIES_SWITCH {
        let q = -(t * t) / 4.0;
        let mut term = 1.0 / gamma(1.0 - alpha);
        let mut sum = term;
        for k in 1..200 {
            let kf = k as f64;
            term *= q / (kf * (kf - alpha));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() && k > 4 {
                break;
            }
        }
        2f64.powf(alpha) * sum
    } else {
        t.powf(alpha) * bessel_j_real(-alpha, t)
    }
}

/// J_nu(t) for real nu > -1 and t > 0 (t = 0 allowed for nu >= 0).
pub(crate) fn bessel_j_real(nu: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    if t <= SERIES_SWITCH || nu > t {
        return series(nu, t);
    }
    let shift = if nu >= 1.0 { nu.floor() as usize } else { 0 };
    let nu0 = nu - shift as f64;
    let (mut j0, mut j1) = if t >= HANKEL_SWITCH {
        (hankel(nu0, t), hankel(nu0 + 1.0, t))
    } else {
        miller_pair(nu0, t)
    };
    for i in 0..shift {
        let mu = nu0 + 1.0 + i as f64;
        let j2 = 2.0 * mu / t * j1 - j0;
        j0 = j1;
        j1 = j2;
    }
    j0
}

fn series(nu: f64, t: f64) -> f64 {
    let half = t / 2.0;
    let q = -half * half;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for k in 1..300 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && kf > half {
            break;
        }
    }
    sum
}

fn hankel(nu: f64, t: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let chi = t - (nu / 2.0 + 0.25) * PI;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= (mu - odd * odd) / (k as f64 * 8.0 * t);
        }
        if a.abs() > prev && k > 2 {
            break;
        }
        prev = a.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (2.0 / (PI * t)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Backward recurrence for (J_nu, J_{nu+1}), |nu| < 1, normalized by
/// (t/2)^nu = sum_k (nu + 2k) Gamma(nu + k) / k! J_{nu+2k}(t).
fn miller_pair(nu: f64, t: f64) -> (f64, f64) {
    let top = 2 * ((t as usize + 40) / 2);
    let mut f = vec![0.0; top + 2];
    f[top] = 1e-30;
    for k in (1..=top).rev() {
        f[k - 1] = 2.0 * (nu + k as f64) / t * f[k] - f[k + 1];
        if f[k - 1].abs() > 1e250 {
            for v in f.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let mut g = gamma(nu + 1.0);
    let mut s = g * f[0];
    let mut j = 1;
    while 2 * j <= top {
        s += (nu + 2.0 * j as f64) * g * f[2 * j];
        g *= (nu + j as f64) / (j as f64 + 1.0);
        j += 1;
    }
    let scale = (t / 2.0).powf(nu) / s;
    (f[0] * scale, f[1] * scale)
}

/// The first `count` positive zeros of J_nu for real nu > -1.
pub(crate) fn bessel_zeros_real(nu: f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let step = 0.25;
    let mut a = 1e-6;
    let mut fa = bessel_j_real(nu, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_j_real(nu, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            let m = zeros.len() + 1;
            zeros.push(refine_zero(nu, a, b, fa, mcmahon(nu, m)));
        }
        a = b;
        fa = fb;
    }
    zeros
}

/// All positive zeros of J_nu not exceeding `bound`, for real nu >= 0.
pub(crate) fn bessel_zeros_below(nu: f64, bound: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    let step = 0.25;
    // J_nu has no zeros below nu.
    let mut a = nu.max(1e-6);
    let mut fa = bessel_j_real(nu, a);
    while a < bound {
        let b = a + step;
        let fb = bessel_j_real(nu, b);
        if fa * fb < 0.0 {
            let z = refine_zero(nu, a, b, fa, 0.5 * (a + b));
            if z <= bound {
                zeros.push(z);
            }
        }
        a = b;
        fa = fb;
    }
    zeros
}

/// sqrt(2x/pi) e^x K_mu(x) from the large-argument expansion, for x >= 15.
pub fn bessel_k_scaled(mu: f64, x: f64) -> Result<f64> {
    if x < 15.0 {
        return Err(LabError::Domain(format!("asymptotic K expansion needs x >= 15, got {x}")));
    }
    let m4 = 4.0 * mu * mu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (m4 - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

fn mcmahon(nu: f64, m: usize) -> f64 {
    let beta = (m as f64 + nu / 2.0 - 0.25) * PI;
    let mu = 4.0 * nu * nu;
    beta - (mu - 1.0) / (8.0 * beta) - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * (8.0 * beta).powi(3))
}

/// Safeguarded Newton on g(t) = t^{-nu} J_nu(t), for which g/g' = -J_nu/J_{nu+1}.
fn refine_zero(nu: f64, mut lo: f64, mut hi: f64, flo: f64, guess: f64) -> f64 {
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let fx = bessel_j_real(nu, x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
        } else {
            hi = x;
        }
        let step = -fx / bessel_j_real(nu + 1.0, x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * x.max(1.0) || hi - lo < 1e-15 * x.max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// The m-th positive zero of J_nu, |nu| < 1.
pub fn bessel_zero(nu: BesselOrder, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(LabError::Domain("zero index m must be at least 1".into()));
    }
    Ok(*bessel_zeros_real(nu.0, m).last().expect("m >= 1"))
}

/// gamma_m = [int_0^{2R} t J_{-alpha}(j t / 2R)^2 dt]^{-1/2}.
///
/// Uses int_0^a t J_nu(j t / a)^2 dt = a^2 J_{nu+1}(j)^2 / 2 at a zero j of J_nu.
pub fn radial_norm_gamma(params: &WeightParams, m: usize) -> Result<f64> {
    let order = BesselOrder::for_params(params);
    let j = bessel_zero(order, m)?;
    Ok(radial_norm_from_zero(params, j))
}

pub(crate) fn radial_norm_from_zero(params: &WeightParams, j: f64) -> f64 {
    let a = 2.0 * params.r;
    let jp = bessel_j_real(1.0 - params.alpha(), j);
    1.0 / (a * jp.abs() / 2f64.sqrt())
}
