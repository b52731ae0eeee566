use std::f64::consts::PI;

use almgren_core::quadrature::{GradedLayout, RadialGrid};
use almgren_core::{integrate_halfball, integrate_halfsphere, AngularGrid1D, HalfBallGrid, WeightParams};
use proptest::prelude::*;
use statrs::function::beta::beta;

fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

fn ball_volume(p: &WeightParams, r: f64) -> f64 {
    let g = HalfBallGrid::new(p, r).unwrap();
    integrate_halfball(&g, &ones(g.len()), r).unwrap()
}

#[test]
fn half_disk_area() {
    let p = WeightParams::from_b(0.0, 1, 1.0).unwrap();
    assert!((ball_volume(&p, 1.0) - PI / 2.0).abs() < 1e-12);
    assert!((ball_volume(&p, 2.0) - 2.0 * PI).abs() < 1e-11);
}

#[test]
fn weighted_half_disk_matches_beta_oracle() {
    // int_0^1 rho^{1.5} d rho * int_0^pi sin^{0.5} = B(3/4, 1/2) / 2.5
    let p = WeightParams::from_b(0.5, 1, 1.0).unwrap();
    let exact = beta(0.75, 0.5) / 2.5;
    assert!((ball_volume(&p, 1.0) - exact).abs() < 1e-10, "{}", ball_volume(&p, 1.0) - exact);
}

#[test]
fn half_circle_length_and_second_moment() {
    let p = WeightParams::from_b(0.0, 1, 1.0).unwrap();
    let a = AngularGrid1D::new(&p);
    assert!((integrate_halfsphere(&a, &ones(a.len()), &p, 1.0).unwrap() - PI).abs() < 1e-12);
    let cos2: Vec<f64> = a.nodes.iter().map(|psi| psi.cos().powi(2)).collect();
    assert!((integrate_halfsphere(&a, &cos2, &p, 1.0).unwrap() - PI / 2.0).abs() < 1e-12);
}

#[test]
fn errors_on_bad_radius_and_samples() {
    let p = WeightParams::from_b(0.0, 2, 1.0).unwrap();
    let g = HalfBallGrid::new(&p, 1.0).unwrap();
    assert!(integrate_halfball(&g, &ones(g.len()), 0.5).is_err());
    let mut f = ones(g.len());
    f[3] = f64::NAN;
    assert!(integrate_halfball(&g, &f, 1.0).is_err());
    assert!(integrate_halfball(&g, &ones(5), 1.0).is_err());
}

#[test]
fn refinement_reduces_error() {
    // Smooth integrand e^{rho} cos(psi)^2 on a coarse layout and its refinement.
    let p = WeightParams::from_b(-0.5, 3, 1.0).unwrap();
    let coarse = GradedLayout { uniform_panels: 1, order: 2, ratio: 0.5, levels: 2, graded_fraction: 0.5 };
    let f = |rho: f64, psi: f64| rho.exp() * psi.cos().powi(2) + (3.0 * psi).sin();
    let exact = HalfBallGrid::with_layouts(&p, 1.0, coarse.refined().refined().refined().refined(), coarse.refined().refined().refined().refined())
        .unwrap()
        .integrate_fn(f);
    let e1 = (HalfBallGrid::with_layouts(&p, 1.0, coarse, coarse).unwrap().integrate_fn(f) - exact).abs();
    let e2 = (HalfBallGrid::with_layouts(&p, 1.0, coarse.refined(), coarse.refined()).unwrap().integrate_fn(f) - exact).abs();
    assert!(e1 / e2 > 3.5, "{e1} {e2}");
}

#[test]
fn eigenfunction_squared_integrates_to_one() {
    // Cross-module normalization: a hemisphere profile squared over S^N_+.
    let p = WeightParams::from_b(0.5, 3, 1.0).unwrap();
    let modes = almgren_core::hemisphere_spectrum::hemisphere_spectrum(&p, 3, 512).unwrap();
    let a = AngularGrid1D::new(&p);
    for m in &modes {
        let g: Vec<f64> = a.nodes.iter().map(|&psi| m.profile.value(psi).powi(2)).collect();
        // The harmonic factor is normalized on S^{N-1}; the profile carries the rest.
        let total = a.dot(&g);
        assert!((total - 1.0).abs() < 1e-6, "mode {} k {}: {}", m.l, m.k, total);
    }
}

proptest! {
    #[test]
    fn shell_is_derivative_of_ball(b in -0.9f64..0.9, n in 1usize..5, r in 0.2f64..3.0) {
        let p = WeightParams::from_b(b, n, r).unwrap();
        let g = HalfBallGrid::new(&p, r).unwrap();
        let ball = integrate_halfball(&g, &ones(g.len()), r).unwrap();
        let shell = integrate_halfsphere(&g.angular, &ones(g.angular.len()), &p, r).unwrap();
        let nb1 = n as f64 + b + 1.0;
        prop_assert!((shell - nb1 / r * ball).abs() < 1e-10 * shell);
    }

    #[test]
    fn weights_are_positive(b in -0.95f64..0.95, n in 1usize..6) {
        let p = WeightParams::from_b(b, n, 1.0).unwrap();
        let a = AngularGrid1D::new(&p);
        prop_assert!(a.weights.iter().all(|w| *w > 0.0));
        prop_assert!(a.nodes.windows(2).all(|w| w[0] < w[1]));
        let rg = RadialGrid::new(&p, 1.0, GradedLayout::radial_default()).unwrap();
        prop_assert!(rg.weights.iter().all(|w| *w > 0.0) && rg.nodes.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn b_tracks_s(s in 1.001f64..1.999, n in 1usize..8) {
        let p = WeightParams::new(s, n, 1.0).unwrap();
        prop_assert_eq!(p.b, 3.0 - 2.0 * s);
        prop_assert!(p.b > -1.0 && p.b < 1.0);
        prop_assert_eq!(p.supercritical, n as f64 > 2.0 * s);
    }
}
