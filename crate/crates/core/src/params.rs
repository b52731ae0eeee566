use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// The parameter bundle (s, b, N, R). `b = 3 - 2s` is the weight exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub s: f64,
    pub b: f64,
    pub n: usize,
    pub r: f64,
    /// N > 2s, where the Hardy-Rellich bound applies.
    pub supercritical: bool,
}

impl WeightParams {
    pub fn new(s: f64, n: usize, r: f64) -> Result<Self> {
        if !(s > 1.0 && s < 2.0) {
            return Err(LabError::Domain(format!("s = {s} must lie in (1, 2)")));
        }
        if n == 0 {
            return Err(LabError::Domain("N must be at least 1".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(LabError::Domain(format!("R = {r} must be positive")));
        }
        let b = 3.0 - 2.0 * s;
        Ok(Self {
            s,
            b,
            n,
            r,
            supercritical: n as f64 > 2.0 * s,
        })
    }

    /// Builds the bundle from the weight exponent instead of the order.
    pub fn from_b(b: f64, n: usize, r: f64) -> Result<Self> {
        if !(b > -1.0 && b < 1.0) {
            return Err(LabError::Domain(format!("b = {b} must lie in (-1, 1)")));
        }
        Self::new((3.0 - b) / 2.0, n, r)
    }

    /// alpha = (1 - b) / 2, the Bessel order shift of the t-factor.
    pub fn alpha(&self) -> f64 {
        (1.0 - self.b) / 2.0
    }

    /// N + b - 1, the recurring homogeneity constant.
    pub fn nb1(&self) -> f64 {
        self.n as f64 + self.b - 1.0
    }

    pub fn with_radius(&self, r: f64) -> Result<Self> {
        Self::new(self.s, self.n, r)
    }
}

/// Surface measure of the unit sphere S^{d-1} in R^d (|S^0| = 2).
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / crate::special_functions::gamma(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_is_tied_to_s() {
        let p = WeightParams::new(1.25, 3, 1.0).unwrap();
        assert_eq!(p.b, 0.5);
        assert!(p.supercritical);
        let q = WeightParams::new(1.75, 3, 1.0).unwrap();
        assert!(!q.supercritical);
        assert!(WeightParams::new(2.0, 3, 1.0).is_err());
        assert!(WeightParams::new(1.5, 0, 1.0).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }
}
