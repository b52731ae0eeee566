//! The thirteen acceptance criteria, each with its tolerance and wall-clock
//! budget. Prints one PASS/FAIL line per criterion to stderr and fails if
//! any fails.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use almgren_core::almgren::*;
use almgren_core::extension_profile::{solve_profile, trace_laplacian_check, PeriodicField, DEFAULT_PROFILE_RESOLUTION, DEFAULT_T_MAX};
use almgren_core::hemisphere_spectrum::{distinct, hemisphere_eigs, hemisphere_spectrum, DEFAULT_RESOLUTION};
use almgren_core::inequalities::{check_family, FamilyKind, TestFamily};
use almgren_core::solution_synthesis::{coefficient_samples, fit_blowup, fit_radii, synthesize, Branch, Candidate, SeparableSolution, TermSpec};
use almgren_core::special_functions::{bessel_zero, BesselOrder};
use almgren_core::WeightParams;
use common::{params, rel, sigmas, solution, spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
/// (name, budget in seconds, check).
type Criterion = (&'static str, f64, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> std::result::Result<(), String> {
    if ok { Ok(()) } else { Err(msg) }
}

fn c1_half_circle() -> Outcome {
    let modes = hemisphere_spectrum(&params(1, 0.0), 5, DEFAULT_RESOLUTION).map_err(|e| e.to_string())?;
    let mus: Vec<f64> = distinct(&modes).iter().map(|m| m.mu).collect();
    let err = [0.0, 1.0, 4.0, 9.0, 16.0].iter().zip(&mus).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(mus.len() >= 5 && err <= 1e-6, format!("max error {err:.2e}"))?;
    Ok(format!("max error {err:.2e}"))
}

fn c2_polynomial_anchors() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut order = f64::INFINITY;
    for (n, b) in [(3, 0.5), (4, -0.5)] {
        let p = params(n, b);
        let modes = hemisphere_spectrum(&p, 6, DEFAULT_RESOLUTION).map_err(|e| e.to_string())?;
        let nb = n as f64 + b;
        for want in [0.0, nb, 2.0 * (nb + 1.0)] {
            worst = worst.max(modes.iter().map(|m| (m.mu - want).abs()).fold(f64::INFINITY, f64::min));
        }
        // The order is measured on a coarse ladder, where the error is above roundoff.
        for m in hemisphere_eigs(&p, 2, 4, 512).map_err(|e| e.to_string())?.iter().filter(|m| m.mu > 1.0) {
            order = order.min(m.observed_order.ok_or("order not measurable")?);
        }
    }
    ensure(worst <= 1e-5 && order >= 1.8, format!("anchor error {worst:.2e}, order {order:.3}"))?;
    Ok(format!("anchor error {worst:.2e}, min order {order:.3}"))
}

fn c3_bessel_zeros() -> Outcome {
    let half = BesselOrder::new(-0.5).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for m in 1..=20 {
        let z = bessel_zero(half, m).map_err(|e| e.to_string())?;
        worst = worst.max((z - (m as f64 - 0.5) * PI).abs());
    }
    // Bisection on the ascending series of J_0.
    let j0 = |t: f64| {
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..80 {
            term *= -t * t / 4.0 / (k * k) as f64;
            sum += term;
        }
        sum
    };
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if j0(m) > 0.0 { a = m } else { b = m }
    }
    let z0 = bessel_zero(BesselOrder::new(0.0).map_err(|e| e.to_string())?, 1).map_err(|e| e.to_string())?;
    let e0 = (z0 - 0.5 * (a + b)).abs();
    ensure(worst <= 1e-10 && e0 <= 1e-10, format!("half-order {worst:.2e}, j_0,1 {e0:.2e}"))?;
    Ok(format!("half-order {worst:.2e}, j_0,1 {e0:.2e}"))
}

fn c4_profile() -> Outcome {
    let p = solve_profile(0.0, DEFAULT_T_MAX, DEFAULT_PROFILE_RESOLUTION).map_err(|e| e.to_string())?;
    let mut err: f64 = 0.0;
    for i in 0..=2000 {
        let t = i as f64 * 10.0 / 2000.0;
        err = err.max((p.phi_at(t) - (1.0 + t) * (-t).exp()).abs());
    }
    let dj = (p.j - 2.0).abs();
    ensure(err <= 1e-6 && dj <= 1e-5, format!("phi error {err:.2e}, |J-2| {dj:.2e}"))?;
    Ok(format!("phi error {err:.2e}, |J-2| {dj:.2e}"))
}

fn c5_trace_relation() -> Outcome {
    let p = WeightParams::new(1.5, 2, 1.0).map_err(|e| e.to_string())?;
    let u = PeriodicField::from_fn(2, 64, 20.0, |x| (-x.iter().map(|v| (v - 10.0).powi(2)).sum::<f64>() / 2.0).exp())
        .map_err(|e| e.to_string())?;
    let c = trace_laplacian_check(&p, &u).map_err(|e| e.to_string())?;
    let off = (c.kappa_estimate - 2.0).abs() / 2.0;
    ensure(c.relative_spread < 5e-3 && off <= 1e-2, format!("kappa {:.8}, spread {:.2e}", c.kappa_estimate, c.relative_spread))?;
    Ok(format!("kappa {:.8}, spread {:.2e}", c.kappa_estimate, c.relative_spread))
}

fn radii20() -> Vec<f64> {
    (0..20).map(|i| 0.05 + 0.9 * i as f64 / 19.0).collect()
}

fn c6_pure_mode_frequency() -> Outcome {
    let (mut closed, mut quad): (f64, f64) = (0.0, 0.0);
    for (n, b, l) in [(3, 0.5, 1), (4, -0.5, 2), (2, 0.0, 3)] {
        let sol = solution(n, b, &[(l, 1.0, 0.0)]);
        let s = sol.terms[0].sigma();
        for (prov, worst) in [(Provenance::ClosedForm, &mut closed), (Provenance::Quadrature, &mut quad)] {
            let tr = trace_at(&sol, &radii20(), prov, Component::System).map_err(|e| e.to_string())?;
            *worst = tr.records.iter().map(|r| (r.n - s).abs()).fold(*worst, f64::max);
        }
    }
    ensure(closed <= 1e-10 && quad <= 1e-6, format!("closed {closed:.2e}, quadrature {quad:.2e}"))?;
    Ok(format!("closed {closed:.2e}, quadrature {quad:.2e}"))
}

fn two_term_set() -> Vec<SeparableSolution> {
    vec![solution(3, 0.5, &[(0, 1.0, 0.5), (2, -0.3, 1.0)]), solution(4, -0.5, &[(1, 0.7, -1.2), (3, 1.0, 0.2)])]
}

fn c7_h_derivative() -> Outcome {
    let mut closed: f64 = 0.0;
    let mut ratios = Vec::new();
    for sol in two_term_set() {
        let tr = trace(&sol, &RadiusSchedule::new(1.0), Provenance::ClosedForm, Component::System).map_err(|e| e.to_string())?;
        closed = closed.max(check_H_derivative(&tr).map_err(|e| e.to_string())?);
        let fd = |per: usize| -> std::result::Result<f64, String> {
            let s = RadiusSchedule { r_max: 1.0, decades: 1, per_decade: per };
            let tr = trace(&sol, &s, Provenance::Quadrature, Component::System).map_err(|e| e.to_string())?;
            check_H_derivative(&tr).map_err(|e| e.to_string())
        };
        ratios.push(fd(32)? / fd(64)?);
    }
    let order = ratios.iter().map(|r| r.log2()).fold(f64::INFINITY, f64::min);
    ensure(closed <= 1e-10 && order >= 1.8, format!("closed {closed:.2e}, quadrature order {order:.3}"))?;
    Ok(format!("closed {closed:.2e}, quadrature order {order:.3}"))
}

fn c8_pohozaev() -> Outcome {
    let (mut closed, mut quad): (f64, f64) = (0.0, 0.0);
    let mut set = two_term_set();
    set.push(solution(3, 0.5, &[(1, 1.0, 0.0)]));
    set.push(solution(4, 0.0, &[(2, 0.6, 1.4)]));
    for sol in &set {
        for r in [0.25, 0.5, 0.75] {
            let (a, b) = check_pohozaev(sol, r).map_err(|e| e.to_string())?;
            closed = closed.max(a).max(b);
            let (a, b) = check_pohozaev_with(sol, r, Provenance::Quadrature).map_err(|e| e.to_string())?;
            quad = quad.max(a).max(b);
        }
    }
    ensure(closed <= 1e-8 && quad <= 5e-5, format!("closed {closed:.2e}, quadrature {quad:.2e}"))?;
    Ok(format!("closed {closed:.2e}, quadrature {quad:.2e}"))
}

fn c9_frequency_limit() -> Outcome {
    let (n, b) = (3, 0.5);
    let sg = sigmas(n, b);
    let sched = RadiusSchedule::new(1.0);
    let run = |sol: &SeparableSolution| -> std::result::Result<FrequencyLimit, String> {
        let tr = trace(sol, &sched, Provenance::ClosedForm, Component::System).map_err(|e| e.to_string())?;
        frequency_limit(&tr, &sg).map_err(|e| e.to_string())?.require_match(&sg).map_err(|e| e.to_string())
    };
    let two = run(&solution(n, b, &[(1, 1.0, 0.0), (2, 0.5, 0.0)]))?;
    let mixed = run(&solution(n, b, &[(2, 1.0, 0.8)]))?;
    let e_two = (two.gamma - sg[1]).abs();
    let e_mix = (mixed.gamma - sg[2]).abs();
    let band = [two.h_ratio_band, mixed.h_ratio_band];
    let band_ok = band.iter().all(|&(lo, hi)| lo >= 0.9 && hi <= 1.1) && two.h_limit > 0.0 && mixed.h_limit > 0.0;
    ensure(e_two <= 1e-4 && e_mix <= 1e-4 && band_ok, format!("gamma errors {e_two:.2e}, {e_mix:.2e}, bands {band:?}"))?;
    Ok(format!("gamma errors {e_two:.2e}, {e_mix:.2e}"))
}

fn c10_blowup_fit() -> Outcome {
    let (n, b) = (4, -0.5);
    let p = params(n, b);
    let cands: Vec<Candidate> = distinct(spectrum(n, b)).iter().map(|m| Candidate::from_mode(&p, m)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let c = &cands[2];
    let samples: Vec<(f64, f64, f64)> = fit_radii(1.0)
        .into_iter()
        .map(|l| (l, 2.0 * l.powf(c.sigma) + 0.5 * l.powf(c.sigma + 2.0), 0.5 * c.k_const * l.powf(c.sigma)))
        .collect();
    let fit = fit_blowup(&samples, &cands).map_err(|e| e.to_string())?;
    let (e1, e2) = (rel(fit.c1_hat, 2.0), rel(fit.d1_hat, 0.5 * c.k_const));
    let sol = solution(n, b, &[(1, 0.0, 1.0)]);
    let deg = fit_blowup(&coefficient_samples(&sol, &sol.terms[0].mode).map_err(|e| e.to_string())?, &cands).map_err(|e| e.to_string())?;
    ensure(e1 <= 1e-6 && e2 <= 1e-6 && deg.branch == Branch::SigmaPlusTwo, format!("c1 {e1:.2e}, d1 {e2:.2e}, degenerate {:?}", deg.branch))?;
    Ok(format!("c1 {e1:.2e}, d1 {e2:.2e}, degenerate branch {:?}", deg.branch))
}

fn c11_inequality_suite() -> Outcome {
    let (mut violations, mut change, mut stable, mut worst) = (0, 0.0f64, true, f64::INFINITY);
    for (n, b) in [(3, 0.5), (4, -0.5), (4, 0.0)] {
        let rep = check_family(&params(n, b), &TestFamily::new(FamilyKind::Mixed, 100, 2024), 1.0).map_err(|e| e.to_string())?;
        violations += rep.violations;
        change = change.max(rep.refinement_change);
        stable &= rep.sign_stable;
        worst = worst.min(rep.worst_relative);
    }
    let msg = format!("{violations} violations, worst relative margin {worst:.3e}, refinement change {change:.2e}, sign stable {stable}");
    ensure(violations == 0 && stable && change < 1e-3, msg.clone())?;
    Ok(msg)
}

fn random_synthesis(rng: &mut ChaCha8Rng) -> SeparableSolution {
    let (n, b) = [(3, 0.5), (4, -0.5), (4, 0.0)][rng.gen_range(0..3)];
    let l1 = rng.gen_range(0..3);
    let l2 = l1 + rng.gen_range(1..3);
    let mut coef = || rng.gen_range(-2.0..2.0);
    let terms = [TermSpec { l: l1, channel: 0, c1: coef(), d1: coef() }, TermSpec { l: l2, channel: 0, c1: coef(), d1: coef() }];
    synthesize(&params(n, b), spectrum(n, b), &terms).expect("valid terms")
}

fn c12_nu_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut min_nu1 = f64::INFINITY;
    let mut order = f64::INFINITY;
    for _ in 0..10 {
        let sol = random_synthesis(&mut rng);
        for _ in 0..50 {
            let r = rng.gen_range(0.01..0.99);
            min_nu1 = min_nu1.min(nu_decomposition(&sol, r).map_err(|e| e.to_string())?.0);
        }
        // N' by central differences against nu1 + nu2, at two step sizes.
        let r = rng.gen_range(0.2..0.8);
        let (nu1, nu2) = nu_decomposition(&sol, r).map_err(|e| e.to_string())?;
        let err = |h: f64| -> std::result::Result<f64, String> {
            let f = |x: f64| frequency(&sol, x).map_err(|e| e.to_string());
            Ok(((f(r + h)? - f(r - h)?) / (2.0 * h) - nu1 - nu2).abs())
        };
        let (e1, e2) = (err(2e-2)?, err(1e-2)?);
        if e1 > 1e-9 {
            order = order.min((e1 / e2).log2());
        }
    }
    ensure(min_nu1 >= -1e-9 && order >= 1.8, format!("min nu1 {min_nu1:.2e}, FD order {order:.3}"))?;
    Ok(format!("min nu1 {min_nu1:.2e}, FD order {order:.3}"))
}

fn c13_cross_path() -> Outcome {
    let mut set = two_term_set();
    set.push(solution(2, 0.0, &[(0, 1.0, 1.0), (1, 0.5, -0.5), (4, 0.2, 0.3)]));
    set.push(solution(4, 0.0, &[(3, 0.0, 1.0)]));
    let mut worst: f64 = 0.0;
    for sol in &set {
        for comp in [Component::System, Component::UOnly] {
            let a = trace_at(sol, &radii20(), Provenance::ClosedForm, comp).map_err(|e| e.to_string())?;
            let q = trace_at(sol, &radii20(), Provenance::Quadrature, comp).map_err(|e| e.to_string())?;
            for (x, y) in a.records.iter().zip(&q.records) {
                worst = worst.max(rel(y.d, x.d)).max(rel(y.h, x.h)).max(rel(y.n, x.n));
            }
        }
    }
    ensure(worst <= 1e-6, format!("max relative difference {worst:.2e}"))?;
    Ok(format!("max relative difference {worst:.2e}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 13] = [
        ("hemisphere spectrum N=1 b=0", 1.0, c1_half_circle),
        ("polynomial eigenvalues and Richardson order", 5.0, c2_polynomial_anchors),
        ("Bessel zeros", 1.0, c3_bessel_zeros),
        ("extension profile b=0", 2.0, c4_profile),
        ("trace relation on a 64^2 torus", 10.0, c5_trace_relation),
        ("pure-mode frequency", 5.0, c6_pure_mode_frequency),
        ("H' = 2D/r", 5.0, c7_h_derivative),
        ("Pohozaev residuals", 10.0, c8_pohozaev),
        ("frequency limit", 10.0, c9_frequency_limit),
        ("blow-up fitter", 2.0, c10_blowup_fit),
        ("inequality suite", 30.0, c11_inequality_suite),
        ("nu decomposition", 10.0, c12_nu_decomposition),
        ("cross-path consistency", 20.0, c13_cross_path),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let over = took > Duration::from_secs_f64(*budget);
        let (status, detail) = match (&out, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        // Written to the raw handle so the line shows even when output is captured.
        let _ = writeln!(std::io::stderr(), "{status} {:>2} {name}: {detail} ({:.2} s)", i + 1, took.as_secs_f64());
        if status == "FAIL" {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
