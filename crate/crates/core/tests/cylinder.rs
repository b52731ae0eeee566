use std::collections::BTreeMap;
use std::f64::consts::PI;

use almgren_core::cylinder_spectrum::{cylinder_mode, dirichlet_eigs, poisson_solve, CylinderBasis, CylinderGrid};
use almgren_core::special_functions::{bessel_zero, BesselOrder};
use almgren_core::{LabError, WeightParams};

fn p(n: usize, b: f64) -> WeightParams {
    WeightParams::from_b(b, n, 0.5).unwrap()
}

#[test]
fn dirichlet_closed_forms() {
    let s = dirichlet_eigs(1, 0.5, 4).unwrap();
    assert!((s.modes[0].mu - (PI / 2.0).powi(2)).abs() < 1e-14);
    let d = dirichlet_eigs(2, 0.5, 6).unwrap();
    let j01 = bessel_zero(BesselOrder::new(0.0).unwrap(), 1).unwrap();
    assert!((d.modes[0].mu - j01 * j01).abs() < 1e-9);
    assert!((d.modes[0].mu - 5.7832).abs() < 1e-4);
    for sp in [&s, &d] {
        assert!(sp.modes[0].mu < sp.modes[1].mu);
        assert!(sp.modes.windows(2).all(|w| w[0].mu <= w[1].mu));
    }
    assert!(matches!(dirichlet_eigs(3, 0.5, 2), Err(LabError::UnsupportedDimension(3))));
}

#[test]
fn dirichlet_modes_are_orthonormal() {
    let grid = CylinderGrid::with_panels(&p(2, 0.0), 8, 8).unwrap();
    let d = dirichlet_eigs(2, 0.5, 6).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let g: f64 = grid.x_nodes.iter().zip(&grid.x_weights).map(|(x, w)| w * d.modes[i].eval(x) * d.modes[j].eval(x)).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-8, "({i},{j}) {g}");
        }
    }
}

#[test]
fn eigenvalue_examples() {
    let m = cylinder_mode(&p(1, 0.0), 1, 1).unwrap();
    assert!((m.lambda - PI * PI / 2.0).abs() < 1e-12);
    assert!(cylinder_mode(&p(1, 0.0), 0, 1).is_err());
    let basis = CylinderBasis::new(&p(2, 0.3), 5, 5).unwrap();
    for n in 1..=5 {
        for m in 1..=5 {
            let e = basis.mode(n, m).unwrap();
            assert!((e.lambda - (e.mu_n + e.j * e.j / (4.0 * 0.25))).abs() < 1e-12);
            if m < 5 {
                assert!(basis.eigenvalue(n, m + 1).unwrap() > e.lambda);
            }
            if n < 5 {
                assert!(basis.eigenvalue(n + 1, m).unwrap() >= e.lambda);
            }
        }
    }
}

#[test]
fn boundary_conditions() {
    for &b in &[-0.6, 0.0, 0.7] {
        let e = cylinder_mode(&p(1, b), 2, 3).unwrap();
        // Vanishing on top and lateral boundary.
        assert!(e.eval(&[0.3], 1.0).abs() < 1e-12);
        assert!(e.eval(&[1.0], 0.4).abs() < 1e-12);
        // t^b d_t e -> 0 as t -> 0, decreasing in magnitude.
        let flux: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&t: &f64| (t.powf(b) * e.t_factor_prime(t) * e.dirichlet.eval(&[0.3])).abs()).collect();
        assert!(flux[0] > flux[1] && flux[1] > flux[2], "b {b}: {flux:?}");
    }
}

#[test]
fn cylinder_modes_are_orthonormal() {
    let pr = p(1, 0.4);
    let grid = CylinderGrid::new(&pr).unwrap();
    let basis = CylinderBasis::new(&pr, 3, 2).unwrap();
    let modes: Vec<_> = (1..=3).flat_map(|n| (1..=2).map(move |m| (n, m))).map(|(n, m)| basis.mode(n, m).unwrap()).collect();
    for (i, a) in modes.iter().enumerate() {
        for (j, c) in modes.iter().enumerate() {
            let g = grid.integrate(|x, t| a.eval(x, t) * c.eval(x, t));
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-8, "({i},{j}) {g}");
        }
    }
}

#[test]
fn weak_eigen_residual() {
    // phi vanishes on the lateral boundary and on top; several random-ish shapes.
    let pr = p(1, -0.3);
    let grid = CylinderGrid::new(&pr).unwrap();
    let e = cylinder_mode(&pr, 2, 2).unwrap();
    for (c1, c2) in [(0.0, 0.0), (0.7, -0.2), (-1.3, 0.5), (0.4, 1.1), (2.0, -0.9)] {
        let phi = |x: f64, t: f64| (1.0 - x * x) * (1.0 - t) * (1.0 + c1 * x + c2 * t * t);
        let dphi = |x: f64, t: f64| {
            let q = 1.0 + c1 * x + c2 * t * t;
            [(-2.0 * x) * (1.0 - t) * q + (1.0 - x * x) * (1.0 - t) * c1, -(1.0 - x * x) * q + (1.0 - x * x) * (1.0 - t) * 2.0 * c2 * t]
        };
        let r = grid.integrate(|x, t| {
            let g = e.grad(x, t);
            let d = dphi(x[0], t);
            g[0] * d[0] + g[1] * d[1] - e.lambda * e.eval(x, t) * phi(x[0], t)
        });
        assert!(r.abs() < 1e-8, "({c1}, {c2}): {r}");
    }
}

#[test]
fn poisson_examples() {
    let pr = p(1, 0.2);
    let basis = CylinderBasis::new(&pr, 3, 3).unwrap();
    let mut c = BTreeMap::new();
    c.insert((1, 1), 2.0);
    c.insert((2, 1), 3.0);
    let sol = poisson_solve(&pr, &c, 8).unwrap();
    assert!((sol[&(1, 1)] - 2.0 / basis.eigenvalue(1, 1).unwrap()).abs() < 1e-14);
    assert!((sol[&(2, 1)] - 3.0 / basis.eigenvalue(2, 1).unwrap()).abs() < 1e-14);
    let mut big = BTreeMap::new();
    big.insert((40, 1), 1.0);
    assert!(poisson_solve(&pr, &big, 8).is_err());
}

#[test]
fn bump_coefficients_decay() {
    let pr = p(1, 0.0);
    let basis = CylinderBasis::new(&pr, 12, 12).unwrap();
    let grid = CylinderGrid::new(&pr).unwrap();
    let coeffs = basis.project(|x, t| (-((x[0] - 0.1).powi(2) + (t - 0.4).powi(2)) / 0.02).exp(), &grid).unwrap();
    let mut scaled: Vec<(f64, f64)> = coeffs.iter().map(|(&(n, m), c)| {
        let l = basis.eigenvalue(n, m).unwrap();
        (l, l * l * c.abs())
    }).collect();
    scaled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let half = scaled.len() / 2;
    let low = scaled[..half].iter().map(|v| v.1).fold(0.0, f64::max);
    let high = scaled[scaled.len() - 10..].iter().map(|v| v.1).fold(0.0, f64::max);
    assert!(high < 0.1 * low, "lambda^2 |c| does not decay: {low} -> {high}");
}

#[test]
fn sup_norm_growth_is_polynomial() {
    // log sup|e| against log lambda stays under a fitted power.
    let pr = p(1, 0.5);
    let basis = CylinderBasis::new(&pr, 8, 8).unwrap();
    let mut pts = Vec::new();
    for n in 1..=8 {
        for m in 1..=8 {
            let e = basis.mode(n, m).unwrap();
            let sup = (0..200).flat_map(|i| (0..100).map(move |k| (-1.0 + i as f64 / 100.0, k as f64 / 100.0)))
                .map(|(x, t)| e.eval(&[x], t).abs())
                .fold(0.0, f64::max);
            pts.push((e.lambda.ln(), sup.ln()));
        }
    }
    let slope = pts.iter().map(|(l, s)| s / l.max(1.0)).fold(f64::NEG_INFINITY, f64::max);
    assert!(slope.is_finite() && slope < 2.0, "{slope}");
}
