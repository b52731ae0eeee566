//! Symmetric tridiagonal eigensolver: Sturm-sequence bisection for the
//! eigenvalues and inverse iteration for the eigenvectors.

use crate::error::{LabError, Result};

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if d.is_empty() || e.len() + 1 != d.len() {
            return Err(LabError::Input(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                d.len(),
                e.len()
            )));
        }
        if d.iter().chain(e.iter()).any(|v| !v.is_finite()) {
            return Err(LabError::Input("non-finite tridiagonal entry".into()));
        }
        Ok(Self { d, e })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.e[i - 1].abs();
            }
            if i + 1 < n {
                r += self.e[i].abs();
            }
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.d.len() {
            let denom = if q == 0.0 { f64::MIN_POSITIVE.sqrt() } else { q };
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `count` smallest eigenvalues in ascending order.
    pub fn lowest(&self, count: usize) -> Vec<f64> {
        (0..count.min(self.len())).map(|k| self.eigenvalue(k)).collect()
    }

    /// Unit eigenvector for the eigenvalue `lambda` by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let shift = lambda + 1e3 * f64::EPSILON * scale;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64 / 13.0).collect();
        normalize(&mut x);
        for _ in 0..4 {
            x = self.solve_shifted(shift, &x);
            normalize(&mut x);
        }
        x
    }

    /// Solves (T - shift I) y = rhs with partial pivoting.
    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            let p = self.d[0] - shift;
            let p = if p == 0.0 { f64::EPSILON } else { p };
            return vec![rhs[0] / p];
        }
        // Row i holds entries at columns i, i+1, i+2 after elimination.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut b = rhs.to_vec();
        let mut cur0 = self.d[0] - shift;
        let mut cur1 = self.e[0];
        let mut cur2 = 0.0;
        for i in 0..n - 1 {
            let sub = self.e[i];
            let nd = self.d[i + 1] - shift;
            let ne = if i + 1 < n - 1 { self.e[i + 1] } else { 0.0 };
            if cur0.abs() >= sub.abs() {
                let piv = if cur0 == 0.0 { f64::EPSILON * self.d[i].abs().max(1.0) } else { cur0 };
                let m = sub / piv;
                u0[i] = piv;
                u1[i] = cur1;
                u2[i] = cur2;
                b[i + 1] -= m * b[i];
                cur0 = nd - m * cur1;
                cur1 = ne - m * cur2;
                cur2 = 0.0;
            } else {
                let m = cur0 / sub;
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = ne;
                let bi = b[i];
                b[i] = b[i + 1];
                b[i + 1] = bi - m * b[i + 1];
                let n0 = cur1 - m * nd;
                let n1 = cur2 - m * ne;
                cur0 = n0;
                cur1 = n1;
                cur2 = 0.0;
            }
        }
        u0[n - 1] = if cur0 == 0.0 { f64::EPSILON } else { cur0 };
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= u1[i] * y[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * y[i + 2];
            }
            y[i] = s / u0[i];
        }
        y
    }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        for v in x.iter_mut() {
            *v /= n;
        }
    } else {
        let c = 1.0 / (x.len() as f64).sqrt();
        x.iter_mut().for_each(|v| *v = c);
    }
}
