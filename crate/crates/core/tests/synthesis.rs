mod common;

use almgren_core::almgren::{compute_DH, compute_DH_with, Component, Provenance};
use almgren_core::hemisphere_spectrum::{distinct, k_constant};
use almgren_core::solution_synthesis::{
    coefficient_samples, eval_point, eval_solution, fit_blowup, fit_radii, fourier_coefficient, synthesize, Branch,
    Candidate, TermSpec,
};
use almgren_core::LabError;
use common::{params, rel, solution, spectrum};
use proptest::prelude::*;

/// Cartesian Δ_b by fourth-order central differences.
fn lap_b(f: &dyn Fn(&[f64]) -> f64, z: &[f64], b: f64) -> f64 {
    let h = 2e-3;
    let n = z.len();
    let mut total = 0.0;
    for i in 0..n {
        let at = |d: f64| {
            let mut w = z.to_vec();
            w[i] += d;
            f(&w)
        };
        let d2 = (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h)) / (12.0 * h * h);
        total += d2;
        if i == n - 1 {
            let d1 = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            total += b / z[i] * d1;
        }
    }
    total
}

#[test]
fn pure_harmonic_mode() {
    let sol = solution(3, 0.5, &[(1, 1.0, 0.0)]);
    let s = sol.terms[0].sigma();
    for psi in [0.3, 1.0, 1.5] {
        let a = eval_solution(&sol, 0.2, psi).unwrap();
        let b = eval_solution(&sol, 0.4, psi).unwrap();
        assert!(rel(b.u / a.u, 2f64.powf(s)) < 1e-12);
        assert_eq!(a.v, 0.0);
    }
    // Radial derivative against central differences at r = 0.5.
    let psi = 0.8;
    let h = 1e-5;
    let fd = (eval_solution(&sol, 0.5 + h, psi).unwrap().u - eval_solution(&sol, 0.5 - h, psi).unwrap().u) / (2.0 * h);
    let p = eval_solution(&sol, 0.5, psi).unwrap();
    let radial: f64 = p.grad_u[0] * psi.sin() + p.grad_u[3] * psi.cos();
    assert!((fd - radial).abs() < 1e-8);
    assert!((radial - s / 0.5 * p.u).abs() < 1e-12);
}

#[test]
fn system_equations_hold_pointwise() {
    // Δ_b U = V and Δ_b V = 0 for a mixed three-term synthesis.
    let (n, b) = (3, 0.5);
    let sol = solution(n, b, &[(0, 0.3, 1.0), (1, 0.0, -0.7), (2, 1.2, 0.4)]);
    let u = |z: &[f64]| eval_point(&sol, z).unwrap().u;
    let v = |z: &[f64]| eval_point(&sol, z).unwrap().v;
    for z in [[0.2, 0.1, -0.3, 0.4], [0.05, 0.3, 0.2, 0.2], [-0.4, 0.1, 0.1, 0.5]] {
        let lu = lap_b(&u, &z, b);
        let lv = lap_b(&v, &z, b);
        let vz = v(&z);
        assert!((lu - vz).abs() < 1e-6 * vz.abs().max(1.0), "{lu} vs {vz}");
        assert!(lv.abs() < 1e-6, "{lv}");
    }
}

#[test]
fn d1_only_mode_substitution() {
    let sol = solution(4, -0.5, &[(0, 0.0, 1.0)]);
    let t = &sol.terms[0];
    let k = k_constant(&params(4, -0.5), &t.mode).unwrap();
    let (f, _, g, _) = t.radial(0.3);
    assert!(rel(f, 0.3f64.powf(t.sigma() + 2.0) / k) < 1e-14);
    assert!(rel(g, 0.3f64.powf(t.sigma())) < 1e-14);
}

#[test]
fn zero_solution() {
    let sol = solution(3, 0.5, &[]);
    assert!(sol.is_zero());
    assert_eq!(compute_DH(&sol, 0.5).unwrap(), (0.0, 0.0));
    assert!(almgren_core::almgren::frequency(&sol, 0.5).is_err());
}

#[test]
fn synthesis_errors() {
    let p = params(3, 0.5);
    let m = spectrum(3, 0.5);
    assert!(synthesize(&p, m, &[TermSpec { l: 99, channel: 0, c1: 1.0, d1: 0.0 }]).is_err());
    assert!(synthesize(&p, m, &[TermSpec { l: 0, channel: 0, c1: f64::NAN, d1: 0.0 }]).is_err());
    let dup = [TermSpec { l: 0, channel: 0, c1: 1.0, d1: 0.0 }, TermSpec { l: 0, channel: 0, c1: 2.0, d1: 0.0 }];
    assert!(synthesize(&p, m, &dup).is_err());
    let sol = solution(3, 0.5, &[(0, 1.0, 0.0)]);
    assert!(matches!(eval_solution(&sol, 1.5, 0.2), Err(LabError::Domain(_))));
}

#[test]
fn fourier_coefficients_and_parseval() {
    let (n, b) = (3, 0.5);
    let sol = solution(n, b, &[(0, 0.5, 1.0), (2, -1.0, 0.3)]);
    let d = distinct(spectrum(n, b));
    for lam in [0.1, 0.5, 0.9] {
        let mut sum = 0.0;
        for t in &sol.terms {
            let (phi, phit) = fourier_coefficient(&sol, &t.mode, lam).unwrap();
            let s = t.sigma();
            assert!(rel(phi, t.c1 * lam.powf(s) + t.d1 / t.k_const * lam.powf(s + 2.0)) < 1e-10);
            assert!(rel(phit, t.d1 * lam.powf(s)) < 1e-10);
            sum += phi * phi + phit * phit;
        }
        // Orthogonality against a mode left out.
        let (a, c) = fourier_coefficient(&sol, d[3], lam).unwrap();
        assert!(a.abs() < 1e-10 && c.abs() < 1e-10);
        // H is normalized by r^{N+b}, so the coefficient sum equals H itself.
        let (_, h) = compute_DH(&sol, lam).unwrap();
        assert!(rel(sum, h) < 1e-10);
    }
}

#[test]
fn fit_recovers_synthetic_coefficients() {
    let p = params(3, 0.5);
    let m = distinct(spectrum(3, 0.5))[1];
    let c = Candidate::from_mode(&p, m).unwrap();
    let s = c.sigma;
    let samples: Vec<(f64, f64, f64)> = fit_radii(1.0)
        .into_iter()
        .map(|l| (l, 2.0 * l.powf(s) + 0.5 * l.powf(s + 2.0), 0.5 * c.k_const * l.powf(s)))
        .collect();
    let others: Vec<Candidate> = distinct(spectrum(3, 0.5)).iter().map(|m| Candidate::from_mode(&p, m).unwrap()).collect();
    let fit = fit_blowup(&samples, &others).unwrap();
    assert!(rel(fit.c1_hat, 2.0) < 1e-6);
    assert!(rel(fit.d1_hat, 0.5 * c.k_const) < 1e-6);
    assert!(fit.residual <= 1e-8);
    assert_eq!(fit.branch, Branch::Sigma);
    assert_eq!(fit.delta1, s);
}

#[test]
fn fit_classifies_branches() {
    let (n, b) = (4, 0.0);
    let p = params(n, b);
    let d = distinct(spectrum(n, b));
    let cands: Vec<Candidate> = d.iter().map(|m| Candidate::from_mode(&p, m).unwrap()).collect();
    // c1 = 0: U starts at sigma + 2.
    let sol = solution(n, b, &[(1, 0.0, 1.0)]);
    let fit = fit_blowup(&coefficient_samples(&sol, &sol.terms[0].mode).unwrap(), &cands).unwrap();
    assert_eq!(fit.branch, Branch::SigmaPlusTwo);
    assert!((fit.delta1 - (d[1].sigma_plus + 2.0)).abs() < 1e-12);
    assert_eq!(fit.delta2, Some(d[1].sigma_plus));
    // Pure V data.
    let pure_v: Vec<(f64, f64, f64)> = fit_radii(1.0).into_iter().map(|l| (l, 0.0, l.powf(d[2].sigma_plus))).collect();
    let fit = fit_blowup(&pure_v, &cands).unwrap();
    assert_eq!(fit.delta2, Some(d[2].sigma_plus));
}

#[test]
fn fit_failures() {
    let p = params(3, 0.5);
    let cands = [Candidate::from_mode(&p, distinct(spectrum(3, 0.5))[0]).unwrap()];
    let few: Vec<(f64, f64, f64)> = (1..5).map(|i| (i as f64 * 0.01, 1.0, 0.0)).collect();
    assert!(matches!(fit_blowup(&few, &cands), Err(LabError::Input(_))));
    let bad: Vec<(f64, f64, f64)> = fit_radii(1.0).into_iter().map(|l| (l, l.powf(0.37).sin() + 3.0 * l, 0.0)).collect();
    assert!(matches!(fit_blowup(&bad, &cands), Err(LabError::ClassificationFailed { .. })));
}

#[test]
fn log_h_slope_gives_leading_exponent() {
    // H ~ r^{2 gamma}, so the slope of log sqrt(H) is the leading exponent.
    let sol = solution(3, 0.5, &[(1, 1.0, 0.5), (2, 0.3, 1.0)]);
    let (r1, r2) = (1e-4, 2e-4);
    let h = |r: f64| compute_DH_with(&sol, r, Provenance::ClosedForm, Component::System).unwrap().1;
    let slope = 0.5 * (h(r2).ln() - h(r1).ln()) / (r2 / r1).ln();
    assert!((slope - sol.leading_exponent().unwrap()).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn fit_is_linear_in_the_data(c1 in -3.0f64..3.0, d1 in -3.0f64..3.0, scale in 0.1f64..10.0) {
        prop_assume!(c1.abs() > 0.1 || d1.abs() > 0.1);
        let (n, b) = (3, 0.5);
        let p = params(n, b);
        let d = distinct(spectrum(n, b));
        let cands: Vec<Candidate> = d.iter().map(|m| Candidate::from_mode(&p, m).unwrap()).collect();
        let sol = solution(n, b, &[(2, c1, d1)]);
        let a = fit_blowup(&coefficient_samples(&sol, &sol.terms[0].mode).unwrap(), &cands).unwrap();
        let big = sol.scaled(scale);
        let f = fit_blowup(&coefficient_samples(&big, &big.terms[0].mode).unwrap(), &cands).unwrap();
        prop_assert!((f.c1_hat - scale * a.c1_hat).abs() < 1e-8 * scale * (c1.abs() + d1.abs()));
        prop_assert!((f.d1_hat - scale * a.d1_hat).abs() < 1e-8 * scale * (c1.abs() + d1.abs()));
        prop_assert!((a.c1_hat - c1).abs() < 1e-6 * (c1.abs() + d1.abs()));
    }
}
