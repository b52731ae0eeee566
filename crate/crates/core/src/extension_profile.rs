//! Extension profile: the decaying minimizer of
//!   J(phi) = int_0^inf t^b [(Δ_{b,t} phi)^2 + 2 phi'^2 + phi^2] dt,
//! with phi(0) = 1 and phi'(0) = 0, where Δ_{b,t} = d^2/dt^2 + (b/t) d/dt.
//! Its Euler-Lagrange equation factors as (Δ_{b,t} - 1)^2 phi = 0, so
//! zeta = Δ_{b,t} phi - phi solves Δ_{b,t} zeta = zeta. Both second-order steps
//! are solved by flux-form finite volumes with exact cell masses of t^b and a
//! Robin closure from the modified Bessel tail at T_max, then Richardson
//! extrapolated over two nested grids.
//!
//! The profile drives the Fourier-side extension U^(xi, t) = u^(xi) phi(|xi| t)
//! on periodic grids.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::params::WeightParams;
use crate::special_functions::bessel_k_scaled;

pub const DEFAULT_T_MAX: f64 = 30.0;
pub const DEFAULT_PROFILE_RESOLUTION: usize = 1 << 15;
const NYQUIST_TOL: f64 = 1e-8;
const SPREAD_FAIL: f64 = 0.05;

/// Discrete profile on the cell centers of [0, T_max], plus t = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub b: f64,
    pub t_max: f64,
    /// Cells of the coarser of the two nested grids.
    pub cells: usize,
    pub h: f64,
    /// t = 0 followed by the cell centers.
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub zeta: Vec<f64>,
    /// J from (Δφ)^2 + 2φ'^2 + φ^2.
    pub j: f64,
    /// J from (Δφ - φ)^2.
    pub j_zeta: f64,
    /// Relative weighted residual of the discrete fourth-order equation.
    pub residual: f64,
    /// |J(M) - J(2M)| / J.
    pub refinement_change: f64,
    /// max |phi| / (1 + t^{(3-b)/2}).
    pub growth_constant: f64,
    /// Local model zeta ~ z0 + z1 t^{1-b} + z2 t^2 near 0.
    zeta_model: [f64; 3],
}

impl ProfileSolution {
    pub fn zeta0(&self) -> f64 {
        self.zeta[0]
    }

    /// nu = (1 - b)/2.
    fn nu(&self) -> f64 {
        (1.0 - self.b) / 2.0
    }

    fn centers(&self) -> &[f64] {
        &self.t[1..]
    }

    fn cubic(&self, v: &[f64], t: f64, even: bool) -> (f64, f64) {
        let h = self.h;
        let m = v.len() as isize;
        let at = |j: isize| -> f64 {
            if j < 0 {
                if even { v[(-1 - j) as usize] } else { f64::NAN }
            } else {
                v[j.min(m - 1) as usize]
            }
        };
        let u = t / h - 0.5;
        let i = u.floor();
        let x = u - i;
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
        let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
        let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
        let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
        let d0 = -(3.0 * x * x - 6.0 * x + 2.0) / 6.0;
        let d1 = (3.0 * x * x - 4.0 * x - 1.0) / 2.0;
        let d2 = -(3.0 * x * x - 2.0 * x - 2.0) / 2.0;
        let d3 = (3.0 * x * x - 1.0) / 6.0;
        (
            l0 * p0 + l1 * p1 + l2 * p2 + l3 * p3,
            (d0 * p0 + d1 * p1 + d2 * p2 + d3 * p3) / h,
        )
    }

    /// phi(t) and phi'(t) for t >= 0. Beyond T_max the leading Bessel tail
    /// t^{1-b/2} e^{-t} is used.
    pub fn phi_eval(&self, t: f64) -> (f64, f64) {
        let c = self.centers();
        let last = *c.last().expect("nonempty");
        if t > last {
            let p = 1.0 - self.b / 2.0;
            let v0 = *self.phi.last().expect("nonempty");
            let v = v0 * (t / last).powf(p) * (-(t - last)).exp();
            return (v, v * (p / t - 1.0));
        }
        self.cubic(&self.phi[1..], t, true)
    }

    pub fn phi_at(&self, t: f64) -> f64 {
        self.phi_eval(t).0
    }

    /// zeta(t) for t >= 0, from the local model on the first cell and a half.
    pub fn zeta_at(&self, t: f64) -> f64 {
        let c = self.centers();
        let last = *c.last().expect("nonempty");
        if t < c[1] {
            let [z0, z1, z2] = self.zeta_model;
            return z0 + z1 * t.powf(1.0 - self.b) + z2 * t * t;
        }
        if t > last {
            let v0 = *self.zeta.last().expect("nonempty");
            return v0 * (t / last).powf(-self.b / 2.0) * (-(t - last)).exp();
        }
        self.cubic(&self.zeta[1..], t, true).0
    }

    /// Exponent nu used by the tail.
    pub fn bessel_order(&self) -> f64 {
        self.nu()
    }
}

/// Grid of M cells on [0, T]: centers, masses int t^b and interior face
/// conductances 1 / int_{c_{f-1}}^{c_f} t^{-b}.
struct Mesh {
    h: f64,
    centers: Vec<f64>,
    mass: Vec<f64>,
    cond: Vec<f64>,
}

impl Mesh {
    fn new(b: f64, t_max: f64, m: usize) -> Self {
        let h = t_max / m as f64;
        let centers: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
        let prim = |t: f64| t.powf(b + 1.0) / (b + 1.0);
        let mass = (0..m).map(|i| prim((i + 1) as f64 * h) - prim(i as f64 * h)).collect();
        let cond = (1..m)
            .map(|f| (1.0 - b) / (centers[f].powf(1.0 - b) - centers[f - 1].powf(1.0 - b)))
            .collect();
        Self { h, centers, mass, cond }
    }

    /// Solves flux differences - mass z = mass src - boundary flux, with a
    /// prescribed flux `f0` at t = 0 and Robin coefficient `kappa_t` at T.
    fn solve(&self, f0: f64, kappa_t: f64, src: Option<&[f64]>) -> Result<Vec<f64>> {
        let m = self.centers.len();
        // Negated operator: positive definite tridiagonal.
        let mut diag = vec![0.0; m];
        for i in 0..m {
            diag[i] = self.mass[i];
            if i > 0 {
                diag[i] += self.cond[i - 1];
            }
            if i + 1 < m {
                diag[i] += self.cond[i];
            }
        }
        diag[m - 1] += kappa_t;
        let mut rhs: Vec<f64> = match src {
            Some(s) => s.iter().zip(&self.mass).map(|(v, w)| -v * w).collect(),
            None => vec![0.0; m],
        };
        rhs[0] -= f0;
        // Thomas algorithm; off-diagonals are -cond.
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut piv = diag[0];
        c[0] = if m > 1 { -self.cond[0] / piv } else { 0.0 };
        d[0] = rhs[0] / piv;
        let mut min_piv = piv;
        for i in 1..m {
            piv = diag[i] + self.cond[i - 1] * c[i - 1];
            if !(piv > 0.0) || !piv.is_finite() {
                return Err(LabError::Solver(format!("profile system lost definiteness at cell {i}")));
            }
            min_piv = min_piv.min(piv);
            if i + 1 < m {
                c[i] = -self.cond[i] / piv;
            }
            d[i] = (rhs[i] + self.cond[i - 1] * d[i - 1]) / piv;
        }
        let mut z = vec![0.0; m];
        z[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            z[i] = d[i] - c[i] * z[i + 1];
        }
        if z.iter().any(|v| !v.is_finite()) {
            let cond_est = diag.iter().cloned().fold(0.0, f64::max) / min_piv;
            return Err(LabError::Solver(format!("non-finite profile solution, condition estimate {cond_est:.3e}")));
        }
        Ok(z)
    }

    /// (L z)_i = (flux differences)_i / mass_i - z_i.
    fn apply(&self, z: &[f64], f0: f64, kappa_t: f64) -> Vec<f64> {
        let m = z.len();
        (0..m)
            .map(|i| {
                let right = if i + 1 < m { self.cond[i] * (z[i + 1] - z[i]) } else { -kappa_t * z[i] };
                let left = if i > 0 { self.cond[i - 1] * (z[i] - z[i - 1]) } else { f0 };
                (right - left) / self.mass[i] - z[i]
            })
            .collect()
    }
}

struct Level {
    mesh: Mesh,
    phi: Vec<f64>,
    zeta: Vec<f64>,
    j: f64,
    j_zeta: f64,
    residual: f64,
    dphi: Vec<f64>,
}

fn solve_level(b: f64, t_max: f64, m: usize) -> Result<Level> {
    let mesh = Mesh::new(b, t_max, m);
    let nu = (1.0 - b) / 2.0;
    let tb = t_max.powf(b);
    let h = mesh.h;
    // Logarithmic derivatives at T: zeta ~ t^nu K_nu, phi ~ t^{nu+1} K_{nu+1}.
    // (t^mu K_mu)' = -t^mu K_{mu-1} and K_{-x} = K_x.
    let rho_z = -bessel_k_scaled(1.0 - nu, t_max)? / bessel_k_scaled(nu, t_max)?;
    let rho_p = -bessel_k_scaled(nu, t_max)? / bessel_k_scaled(nu + 1.0, t_max)?;
    let robin = |rho: f64| -tb * rho / (1.0 - rho * h / 2.0);
    let (kz, kp) = (robin(rho_z), robin(rho_p));
    let zeta1 = mesh.solve(1.0, kz, None)?;
    let phi1 = mesh.solve(0.0, kp, Some(&zeta1))?;
    let p0 = (9.0 * phi1[0] - phi1[1]) / 8.0;
    if !(p0.abs() > 0.0) {
        return Err(LabError::Solver("profile normalization vanished".into()));
    }
    let s = 1.0 / p0;
    let phi: Vec<f64> = phi1.iter().map(|v| v * s).collect();
    let zeta: Vec<f64> = zeta1.iter().map(|v| v * s).collect();
    // Energy by cells and faces; the Robin face carries the tail.
    let mut j = 0.0;
    let mut j_zeta = 0.0;
    for i in 0..m {
        let d = zeta[i] + phi[i];
        j += mesh.mass[i] * (d * d + phi[i] * phi[i]);
        j_zeta += mesh.mass[i] * zeta[i] * zeta[i];
    }
    for f in 1..m {
        let g = phi[f] - phi[f - 1];
        j += 2.0 * mesh.cond[f - 1] * g * g;
    }
    j += 2.0 * kp * phi[m - 1] * phi[m - 1];
    // Fourth-order residual: L applied to zeta must vanish.
    let lz = mesh.apply(&zeta, s, kz);
    let num: f64 = lz.iter().zip(&mesh.mass).map(|(r, w)| w * r * r).sum();
    let den: f64 = zeta.iter().zip(&mesh.mass).map(|(r, w)| w * r * r).sum();
    let residual = (num / den).sqrt();
    // phi' at faces from fluxes, averaged to centers.
    let mut face = vec![0.0; m + 1];
    for f in 1..m {
        face[f] = mesh.cond[f - 1] * (phi[f] - phi[f - 1]) / (f as f64 * h).powf(b);
    }
    face[m] = rho_p * phi[m - 1] / (1.0 - rho_p * h / 2.0);
    let dphi = (0..m).map(|i| 0.5 * (face[i] + face[i + 1])).collect();
    Ok(Level { mesh, phi, zeta, j, j_zeta, residual, dphi })
}

#[derive(Clone, Copy, PartialEq)]
enum Ghost {
    Even,
    Odd,
}

/// Cubic interpolation of fine-grid center values at coarse centers. Coarse
/// center i sits between fine centers 2i and 2i+1.
fn restrict(fine: &[f64], ghost: Ghost) -> Vec<f64> {
    let n = fine.len() / 2;
    let at = |j: isize| -> f64 {
        if j < 0 {
            let v = fine[(-1 - j) as usize];
            if ghost == Ghost::Even { v } else { -v }
        } else if j as usize >= fine.len() {
            fine[fine.len() - 1]
        } else {
            fine[j as usize]
        }
    };
    (0..n)
        .map(|i| {
            let k = 2 * i as isize;
            (-at(k - 1) + 9.0 * at(k) + 9.0 * at(k + 1) - at(k + 2)) / 16.0
        })
        .collect()
}

/// Solves for the profile with `resolution` cells on [0, t_max] (and a second
/// grid with twice as many for the Richardson step).
pub fn solve_profile(b: f64, t_max: f64, resolution: usize) -> Result<ProfileSolution> {
    if !(b > -1.0 && b < 1.0) {
        return Err(LabError::Domain(format!("b = {b} must lie in (-1, 1)")));
    }
    if !(t_max >= 20.0) || !t_max.is_finite() {
        return Err(LabError::Domain(format!("T_max = {t_max} must be at least 20")));
    }
    if resolution < 512 {
        return Err(LabError::Refinement { resolution, suggested: 512 });
    }
    let (coarse, fine) = rayon::join(|| solve_level(b, t_max, resolution), || solve_level(b, t_max, 2 * resolution));
    let (coarse, fine) = (coarse?, fine?);
    let rich = |c: &[f64], fr: Vec<f64>| -> Vec<f64> { c.iter().zip(&fr).map(|(c, f)| (4.0 * f - c) / 3.0).collect() };
    let phi_c = rich(&coarse.phi, restrict(&fine.phi, Ghost::Even));
    let dphi_c = rich(&coarse.dphi, restrict(&fine.dphi, Ghost::Odd));
    // zeta has a t^{1-b} component, so neither reflection fits the first
    // coarse cell; use the local model through the first fine centers.
    let mut zr = restrict(&fine.zeta, Ghost::Even);
    let fm = fit3(&fine.mesh.centers[..3], &fine.zeta[..3], 1.0 - b);
    let c0 = coarse.mesh.centers[0];
    zr[0] = fm[0] + fm[1] * c0.powf(1.0 - b) + fm[2] * c0 * c0;
    let zeta_c = rich(&coarse.zeta, zr);
    let j = (4.0 * fine.j - coarse.j) / 3.0;
    let j_zeta = (4.0 * fine.j_zeta - coarse.j_zeta) / 3.0;
    let centers = coarse.mesh.centers.clone();
    // zeta ~ z0 + z1 t^{1-b} + z2 t^2 through the three smallest centers.
    let model = fit3(&centers[..3], &zeta_c[..3], 1.0 - b);
    let mut t = vec![0.0];
    t.extend(&centers);
    let mut phi = vec![1.0];
    phi.extend(&phi_c);
    let mut dphi = vec![0.0];
    dphi.extend(&dphi_c);
    let mut zeta = vec![model[0]];
    zeta.extend(&zeta_c);
    let growth = t
        .iter()
        .zip(&phi)
        .map(|(t, p)| p.abs() / (1.0 + t.powf((3.0 - b) / 2.0)))
        .fold(0.0, f64::max);
    Ok(ProfileSolution {
        b,
        t_max,
        cells: resolution,
        h: coarse.mesh.h,
        t,
        phi,
        dphi,
        zeta,
        j,
        j_zeta,
        residual: coarse.residual.max(fine.residual),
        refinement_change: (coarse.j - fine.j).abs() / j.abs(),
        growth_constant: growth,
        zeta_model: model,
    })
}

/// Coefficients (c0, c1, c2) of c0 + c1 t^p + c2 t^2 through three points.
fn fit3(t: &[f64], y: &[f64], p: f64) -> [f64; 3] {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i] = [1.0, t[i].powf(p), t[i] * t[i], y[i]];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &z| a[x][col].abs().partial_cmp(&a[z][col].abs()).expect("finite")).expect("rows");
        a.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]]
}

fn cache() -> &'static Mutex<HashMap<u64, Arc<ProfileSolution>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ProfileSolution>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The default-resolution profile for `b`, computed once per process.
pub fn profile_for(b: f64) -> Result<Arc<ProfileSolution>> {
    if let Some(p) = cache().lock().expect("profile cache").get(&b.to_bits()) {
        return Ok(p.clone());
    }
    let p = Arc::new(solve_profile(b, DEFAULT_T_MAX, DEFAULT_PROFILE_RESOLUTION)?);
    cache().lock().expect("profile cache").insert(b.to_bits(), p.clone());
    Ok(p)
}

/// C_b = J(phi), cached per b.
pub fn extension_constant(b: f64) -> Result<f64> {
    Ok(profile_for(b)?.j)
}

/// Real samples on the periodic grid (size^dim points, side `length`), row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    pub dim: usize,
    pub size: usize,
    pub length: f64,
    pub values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(dim: usize, size: usize, length: f64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(LabError::UnsupportedDimension(dim));
        }
        if size < 2 || !(length > 0.0) {
            return Err(LabError::Input("grid needs size >= 2 and positive length".into()));
        }
        if values.len() != size.pow(dim as u32) {
            return Err(LabError::Input(format!("expected {} samples, got {}", size.pow(dim as u32), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Input("non-finite sample".into()));
        }
        Ok(Self { dim, size, length, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(dim: usize, size: usize, length: f64, f: F) -> Result<Self> {
        let total = size.pow(dim as u32);
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            values.push(f(&coords(idx, dim, size, length)));
        }
        Self::new(dim, size, length, values)
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        coords(idx, self.dim, self.size, self.length)
    }

    /// Angular wavevector of a flat spectral index.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        let k = 2.0 * PI / self.length;
        multi_index(idx, self.dim, self.size).into_iter().map(|i| k * signed(i, self.size) as f64).collect()
    }
}

fn multi_index(mut idx: usize, dim: usize, size: usize) -> Vec<usize> {
    let mut out = vec![0; dim];
    for d in (0..dim).rev() {
        out[d] = idx % size;
        idx /= size;
    }
    out
}

fn coords(idx: usize, dim: usize, size: usize, length: f64) -> Vec<f64> {
    multi_index(idx, dim, size).into_iter().map(|i| i as f64 * length / size as f64).collect()
}

fn signed(i: usize, size: usize) -> i64 {
    if i <= size / 2 { i as i64 } else { i as i64 - size as i64 }
}

/// In-place n-dimensional FFT over a size^dim row-major array.
fn fftn(data: &mut [Complex64], dim: usize, size: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(size) } else { planner.plan_fft_forward(size) };
    for axis in 0..dim {
        let stride = size.pow((dim - 1 - axis) as u32);
        let lines = data.len() / size;
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for line in 0..lines {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * stride * size + inner;
            for k in 0..size {
                buf[k] = data[base + k * stride];
            }
            fft.process(&mut buf);
            for k in 0..size {
                data[base + k * stride] = buf[k];
            }
        }
    }
    if inverse {
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

fn spectrum(u: &PeriodicField) -> Result<Vec<Complex64>> {
    let mut hat: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fftn(&mut hat, u.dim, u.size, false);
    if u.size.is_multiple_of(2) {
        let total: f64 = hat.iter().map(|c| c.norm_sqr()).sum();
        let nyq: f64 = hat
            .iter()
            .enumerate()
            .filter(|(i, _)| multi_index(*i, u.dim, u.size).contains(&(u.size / 2)))
            .map(|(_, c)| c.norm_sqr())
            .sum();
        if total > 0.0 && nyq / total > NYQUIST_TOL {
            return Err(LabError::Aliasing { fraction: nyq / total });
        }
    }
    Ok(hat)
}

/// U and Δ_b U on each t level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extension {
    pub t_levels: Vec<f64>,
    pub u: Vec<PeriodicField>,
    pub laplacian: Vec<PeriodicField>,
}

/// Extension of `u` with the profile for `params.b`.
pub fn build_extension(params: &WeightParams, u: &PeriodicField, t_levels: &[f64]) -> Result<Extension> {
    let profile = profile_for(params.b)?;
    build_extension_with(&profile, u, t_levels)
}

/// U^(xi, t) = u^(xi) phi(|xi| t) and (Δ_b U)^(xi, t) = u^(xi) |xi|^2 zeta(|xi| t).
pub fn build_extension_with(profile: &ProfileSolution, u: &PeriodicField, t_levels: &[f64]) -> Result<Extension> {
    if t_levels.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(LabError::Domain("t levels must be finite and nonnegative".into()));
    }
    let hat = spectrum(u)?;
    let xi2: Vec<f64> = (0..hat.len()).map(|i| u.wavevector(i).iter().map(|k| k * k).sum()).collect();
    let levels: Vec<(PeriodicField, PeriodicField)> = t_levels
        .par_iter()
        .map(|&t| {
            let mut a = hat.clone();
            let mut l = hat.clone();
            for i in 0..hat.len() {
                let x = xi2[i].sqrt();
                if t == 0.0 {
                    l[i] *= xi2[i] * profile.zeta0();
                } else {
                    a[i] *= profile.phi_at(x * t);
                    l[i] *= xi2[i] * profile.zeta_at(x * t);
                }
            }
            fftn(&mut a, u.dim, u.size, true);
            fftn(&mut l, u.dim, u.size, true);
            let re = |v: Vec<Complex64>| PeriodicField { dim: u.dim, size: u.size, length: u.length, values: v.iter().map(|c| c.re).collect() };
            (re(a), re(l))
        })
        .collect();
    let (uu, ll) = levels.into_iter().unzip();
    Ok(Extension { t_levels: t_levels.to_vec(), u: uu, laplacian: ll })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub kappa_estimate: f64,
    pub relative_spread: f64,
    /// (|xi|, kappa(xi)) for the frequencies used.
    pub per_frequency: Vec<(f64, f64)>,
}

/// Compares Δ_b U as t -> 0 with Δu frequency by frequency. For each of the
/// 10 lowest frequencies carried by `u`, (Δ_b U)^ / (Δu)^ is sampled at three
/// small t levels and extrapolated to t = 0 with the local form
/// c0 + c1 t^{1-b} + c2 t^2.
pub fn trace_laplacian_check(params: &WeightParams, u: &PeriodicField) -> Result<TraceCheck> {
    let profile = profile_for(params.b)?;
    trace_laplacian_check_with(&profile, u)
}

pub fn trace_laplacian_check_with(profile: &ProfileSolution, u: &PeriodicField) -> Result<TraceCheck> {
    let hat = spectrum(u)?;
    let amax = hat.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut freqs: Vec<(f64, usize)> = (0..hat.len())
        .filter(|&i| hat[i].norm() > 1e-8 * amax)
        .map(|i| (u.wavevector(i).iter().map(|k| k * k).sum::<f64>().sqrt(), i))
        .filter(|(x, _)| *x > 0.0)
        .collect();
    freqs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
    freqs.truncate(10);
    if freqs.is_empty() {
        return Err(LabError::Input("u carries no nonzero frequency".into()));
    }
    let xmax = freqs.iter().map(|f| f.0).fold(0.0, f64::max);
    let ts: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|k| k * 0.01 / 3.0 / xmax).collect();
    let ext = build_extension_with(profile, u, &ts)?;
    let level_hats: Vec<Vec<Complex64>> = ext
        .laplacian
        .iter()
        .map(|f| {
            let mut v: Vec<Complex64> = f.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fftn(&mut v, u.dim, u.size, false);
            v
        })
        .collect();
    let b = profile.b;
    let per: Vec<(f64, f64)> = freqs
        .iter()
        .map(|&(x, i)| {
            let lap_u = -x * x * hat[i];
            let ys: Vec<f64> = level_hats.iter().map(|v| (v[i] / lap_u).re).collect();
            (x, fit3(&ts, &ys, 1.0 - b)[0])
        })
        .collect();
    let mean = per.iter().map(|p| p.1).sum::<f64>() / per.len() as f64;
    let lo = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = per.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / mean.abs();
    if spread > SPREAD_FAIL {
        return Err(LabError::Proportionality { spread });
    }
    Ok(TraceCheck { kappa_estimate: mean, relative_spread: spread, per_frequency: per })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit3_recovers_model() {
        let t = [0.1, 0.2, 0.35];
        let y: Vec<f64> = t.iter().map(|t: &f64| 2.0 - 0.5 * t.powf(0.7) + 3.0 * t * t).collect();
        let c = fit3(&t, &y, 0.7);
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-11 && (c[2] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn fft_roundtrip() {
        let f = PeriodicField::from_fn(2, 8, 1.0, |x| (2.0 * PI * x[0]).sin() + x[1]).unwrap();
        let mut v: Vec<Complex64> = f.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fftn(&mut v, 2, 8, false);
        fftn(&mut v, 2, 8, true);
        for (a, b) in v.iter().zip(&f.values) {
            assert!((a.re - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_profile(0.0, 10.0, 1024).is_err());
        assert!(solve_profile(0.0, 30.0, 100).is_err());
        assert!(solve_profile(1.0, 30.0, 1024).is_err());
    }
}
