use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use almgren_core::almgren::{trace, Component, Provenance, RadiusSchedule};
use almgren_core::extension_profile::{solve_profile, DEFAULT_PROFILE_RESOLUTION, DEFAULT_T_MAX};
use almgren_core::hemisphere_spectrum::{hemisphere_spectrum, DEFAULT_RESOLUTION};
use almgren_core::inequalities::{check_hardy_rellich, check_hardy_trace, ZonalField};
use almgren_core::solution_synthesis::{synthesize, TermSpec};
use almgren_core::special_functions::{bessel_zero, BesselOrder};
use almgren_core::WeightParams;

fn spectra(c: &mut Criterion) {
    let p = WeightParams::from_b(0.5, 3, 1.0).unwrap();
    let mut g = c.benchmark_group("hemisphere");
    g.sample_size(10);
    g.bench_function("six eigenvalues, N=3", |b| b.iter(|| hemisphere_spectrum(black_box(&p), 6, DEFAULT_RESOLUTION).unwrap()));
    g.finish();

    let o = BesselOrder::new(-0.3).unwrap();
    c.bench_function("bessel zeros 1..=50", |b| b.iter(|| (1..=50).map(|m| bessel_zero(o, m).unwrap()).sum::<f64>()));
}

fn profile(c: &mut Criterion) {
    let mut g = c.benchmark_group("profile");
    g.sample_size(20);
    g.bench_function("b=0.5 default grid", |b| b.iter(|| solve_profile(black_box(0.5), DEFAULT_T_MAX, DEFAULT_PROFILE_RESOLUTION).unwrap()));
    g.finish();
}

fn frequency(c: &mut Criterion) {
    let p = WeightParams::from_b(0.5, 3, 1.0).unwrap();
    let modes = hemisphere_spectrum(&p, 4, DEFAULT_RESOLUTION).unwrap();
    let terms = [TermSpec { l: 0, channel: 0, c1: 1.0, d1: 0.5 }, TermSpec { l: 2, channel: 0, c1: -0.3, d1: 1.0 }];
    let sol = synthesize(&p, &modes, &terms).unwrap();
    let full = RadiusSchedule::new(1.0);
    let short = RadiusSchedule { r_max: 1.0, decades: 1, per_decade: 8 };
    c.bench_function("trace closed form, 193 radii", |b| {
        b.iter(|| trace(&sol, &full, Provenance::ClosedForm, Component::System).unwrap())
    });
    let mut g = c.benchmark_group("quadrature");
    g.sample_size(10);
    g.bench_function("trace quadrature, 9 radii", |b| b.iter(|| trace(&sol, &short, Provenance::Quadrature, Component::System).unwrap()));
    g.finish();
}

fn inequalities(c: &mut Criterion) {
    let p = WeightParams::new(1.5, 4, 1.0).unwrap();
    let f = ZonalField::bump(&p, 1.0, 1.3, 0.8, 0.4);
    c.bench_function("hardy trace margin", |b| b.iter(|| check_hardy_trace(&p, black_box(&f), 1.0).unwrap()));
    c.bench_function("hardy-rellich margin", |b| b.iter(|| check_hardy_rellich(&p, black_box(&f)).unwrap()));
}

criterion_group!(benches, spectra, profile, frequency, inequalities);
criterion_main!(benches);
