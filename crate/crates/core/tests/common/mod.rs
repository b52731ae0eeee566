#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use almgren_core::hemisphere_spectrum::{distinct, hemisphere_spectrum, SpectralMode, DEFAULT_RESOLUTION};
use almgren_core::solution_synthesis::{synthesize, SeparableSolution, TermSpec};
use almgren_core::WeightParams;

pub fn params(n: usize, b: f64) -> WeightParams {
    WeightParams::from_b(b, n, 1.0).unwrap()
}

/// First six distinct eigenvalues, computed once per (N, b) per test binary.
type SpectrumCache = Mutex<HashMap<(usize, u64), &'static [SpectralMode]>>;

pub fn spectrum(n: usize, b: f64) -> &'static [SpectralMode] {
    static CACHE: OnceLock<SpectrumCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().unwrap().get(&(n, b.to_bits())) {
        return s;
    }
    let modes = hemisphere_spectrum(&params(n, b), 6, DEFAULT_RESOLUTION).unwrap();
    let leaked: &'static [SpectralMode] = Box::leak(modes.into_boxed_slice());
    cache.lock().unwrap().insert((n, b.to_bits()), leaked);
    leaked
}

pub fn sigmas(n: usize, b: f64) -> Vec<f64> {
    distinct(spectrum(n, b)).iter().map(|m| m.sigma_plus).collect()
}

/// Synthesis from (l, c1, d1) triples on channel 0.
pub fn solution(n: usize, b: f64, terms: &[(usize, f64, f64)]) -> SeparableSolution {
    let spec: Vec<TermSpec> = terms.iter().map(|&(l, c1, d1)| TermSpec { l, channel: 0, c1, d1 }).collect();
    synthesize(&params(n, b), spectrum(n, b), &spec).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
