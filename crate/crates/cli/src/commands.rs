//! Subcommand implementations. Each returns its artifacts plus an optional
//! failure that is reported after the artifacts are written.

use clap::{Args, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use almgren_core::almgren::{
    check_H_derivative, check_pohozaev, fit_nu2_bound, frequency_limit, trace, Component, Provenance, RadiusSchedule,
};
use almgren_core::cylinder_spectrum::CylinderBasis;
use almgren_core::extension_profile::{
    build_extension_with, profile_for, solve_profile, trace_laplacian_check_with, PeriodicField, ProfileSolution,
    DEFAULT_PROFILE_RESOLUTION, DEFAULT_T_MAX,
};
use almgren_core::hemisphere_spectrum::{distinct, hemisphere_spectrum, k_constant, SpectralMode, DEFAULT_RESOLUTION};
use almgren_core::inequalities::{
    check_hardy_rellich, check_hardy_trace, critical_exponent, estimate_sobolev_for, FamilyKind, IntegrationLayout, Margin,
    TestFamily, TestField, ZonalField,
};
use almgren_core::solution_synthesis::{
    coefficient_samples, eval_solution, fit_blowup, synthesize as build, Branch, Candidate, SeparableSolution, TermSpec,
};
use almgren_core::special_functions::{bessel_zero, BesselOrder};
use almgren_core::WeightParams;

use crate::config::RunConfig;
use crate::output::{num, Artifact};
use crate::{CliError, SCHEMA};

pub struct Output {
    pub artifacts: Vec<Artifact>,
    pub failure: Option<CliError>,
}

impl Output {
    fn ok(artifacts: Vec<Artifact>) -> Self {
        Self { artifacts, failure: None }
    }
}

type CmdResult = Result<Output, CliError>;

fn params_json(p: &WeightParams) -> Value {
    json!({ "s": p.s, "b": p.b, "N": p.n, "R": p.r })
}

fn header(cfg: &RunConfig, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("params".into(), params_json(&cfg.params));
    m
}

fn doc(mut head: serde_json::Map<String, Value>, body: Value) -> Value {
    if let Value::Object(b) = body {
        head.extend(b);
    }
    Value::Object(head)
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Subcommand)]
pub enum SpectrumCommand {
    /// Weighted eigenvalues on the upper half sphere.
    Hemisphere {
        /// Number of modes, counted with multiplicity.
        #[arg(long, default_value_t = 6)]
        count: usize,
    },
    /// Eigenvalues of the half cylinder B'_{2R} x (0, 2R), N in {1, 2}.
    Cylinder {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

/// Modes up to `count` distinct eigenvalues, sorted by mu.
fn hemisphere_modes(cfg: &RunConfig, distinct_count: usize) -> Result<Vec<SpectralMode>, CliError> {
    let res = cfg.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let mut modes = hemisphere_spectrum(&cfg.params, distinct_count.max(1), res)?;
    modes.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.k.cmp(&b.k)).then(a.index.cmp(&b.index)));
    Ok(modes)
}

fn mode_json(p: &WeightParams, m: &SpectralMode) -> Result<Value, CliError> {
    Ok(json!({
        "l": m.l, "k": m.k, "index": m.index, "mu": m.mu, "mu_discrete": m.mu_discrete,
        "sigma_plus": m.sigma_plus, "sigma_minus": m.sigma_minus, "multiplicity": m.multiplicity,
        "harmonic_dim": m.harmonic_dim, "observed_order": m.observed_order, "K": k_constant(p, m)?,
    }))
}

pub fn spectrum(cfg: &RunConfig, cmd: &SpectrumCommand) -> CmdResult {
    let p = &cfg.params;
    match *cmd {
        SpectrumCommand::Hemisphere { count } => {
            if count == 0 {
                return Err(CliError::Usage("--count must be at least 1".into()));
            }
            // Each distinct eigenvalue holds at least one mode.
            let modes: Vec<SpectralMode> = hemisphere_modes(cfg, count)?.into_iter().take(count).collect();
            let list = modes.iter().map(|m| mode_json(p, m)).collect::<Result<Vec<_>, _>>()?;
            let rows = modes
                .iter()
                .map(|m| {
                    vec![m.l.to_string(), m.k.to_string(), m.index.to_string(), num(m.mu), num(m.sigma_plus), num(m.sigma_minus)]
                })
                .collect();
            Ok(Output::ok(vec![
                Artifact::json("spectrum", doc(header(cfg, "spectrum hemisphere"), json!({ "resolution": cfg.resolution.unwrap_or(DEFAULT_RESOLUTION), "modes": list }))),
                Artifact::csv("spectrum", &["l", "k", "index", "mu", "sigma_plus", "sigma_minus"], rows),
            ]))
        }
        SpectrumCommand::Cylinder { count } => {
            if count == 0 {
                return Err(CliError::Usage("--count must be at least 1".into()));
            }
            let basis = CylinderBasis::new(p, count, count)?;
            let mut modes = Vec::new();
            for n in 1..=basis.n_max() {
                for m in 1..=basis.m_max() {
                    modes.push(basis.mode(n, m)?);
                }
            }
            modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
            modes.truncate(count);
            let list: Vec<Value> = modes
                .iter()
                .map(|m| json!({ "n": m.n, "m": m.m, "mu_n": m.mu_n, "j": m.j, "lambda": m.lambda }))
                .collect();
            let rows = modes.iter().map(|m| vec![m.n.to_string(), m.m.to_string(), num(m.mu_n), num(m.j), num(m.lambda)]).collect();
            Ok(Output::ok(vec![
                Artifact::json("spectrum", doc(header(cfg, "spectrum cylinder"), json!({ "modes": list }))),
                Artifact::csv("spectrum", &["n", "m", "mu_n", "j", "lambda"], rows),
            ]))
        }
    }
}

// ---------------------------------------------------------------- profile

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Truncation point of the half line.
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
    /// Number of evenly spaced samples on [0, --sample-max].
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    #[arg(long, default_value_t = 10.0)]
    pub sample_max: f64,
}

fn solve_for(cfg: &RunConfig, t_max: f64) -> Result<ProfileSolution, CliError> {
    Ok(solve_profile(cfg.params.b, t_max, cfg.resolution.unwrap_or(DEFAULT_PROFILE_RESOLUTION))?)
}

pub fn profile(cfg: &RunConfig, a: &ProfileArgs) -> CmdResult {
    if a.samples < 2 || !(a.sample_max > 0.0) {
        return Err(CliError::Usage("--samples must be at least 2 and --sample-max positive".into()));
    }
    let p = solve_for(cfg, a.t_max)?;
    let ts: Vec<f64> = (0..a.samples).map(|i| a.sample_max * i as f64 / (a.samples - 1) as f64).collect();
    let samples: Vec<(f64, f64, f64, f64)> = ts
        .iter()
        .map(|&t| {
            let (f, df) = p.phi_eval(t);
            (t, f, df, p.zeta_at(t))
        })
        .collect();
    let js: Vec<Value> = samples.iter().map(|s| json!({ "t": s.0, "phi": s.1, "dphi": s.2, "zeta": s.3 })).collect();
    let body = json!({
        "b": p.b, "J": p.j, "J_zeta": p.j_zeta, "zeta0": p.zeta0(), "residual": p.residual,
        "refinement_change": p.refinement_change, "growth_constant": p.growth_constant,
        "t_max": p.t_max, "cells": p.cells, "phi_samples": js,
    });
    let rows = samples.iter().map(|s| vec![num(s.0), num(s.1), num(s.2), num(s.3)]).collect();
    Ok(Output::ok(vec![
        Artifact::json("profile", doc(header(cfg, "profile"), body)),
        Artifact::csv("profile", &["t", "phi", "dphi", "zeta"], rows),
    ]))
}

// ---------------------------------------------------------------- extend

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldShape {
    /// exp(-|x - c|^2 / (2 w^2)) centered in the box.
    Gaussian,
    /// cos(2 pi x_1 / w) with w rounded to a divisor of the box.
    Cosine,
}

#[derive(Debug, Args)]
pub struct ExtendArgs {
    /// Dimension of the torus (1 to 3).
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Side length of the periodic box.
    #[arg(long, default_value_t = 20.0)]
    pub length: f64,
    #[arg(long, value_enum, default_value_t = FieldShape::Gaussian)]
    pub field: FieldShape,
    /// Gaussian width or cosine wavelength.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Comma-separated t levels.
    #[arg(long, default_value = "0,0.25,0.5,1,2")]
    pub levels: String,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("{what}: {x:?}: {e}"))))
        .collect()
}

pub fn extend(cfg: &RunConfig, a: &ExtendArgs) -> CmdResult {
    let levels = parse_list(&a.levels, "--levels")?;
    if levels.is_empty() || levels.iter().any(|t| !(*t >= 0.0)) {
        return Err(CliError::Usage("--levels needs nonnegative t values".into()));
    }
    if !(a.width > 0.0 && a.length > 0.0) {
        return Err(CliError::Usage("--width and --length must be positive".into()));
    }
    let c = a.length / 2.0;
    let w = a.width;
    let u = match a.field {
        FieldShape::Gaussian => {
            PeriodicField::from_fn(a.dim, a.size, a.length, |x| (-x.iter().map(|v| (v - c).powi(2)).sum::<f64>() / (2.0 * w * w)).exp())?
        }
        FieldShape::Cosine => {
            let k = (a.length / w).round().max(1.0);
            PeriodicField::from_fn(a.dim, a.size, a.length, |x| (2.0 * std::f64::consts::PI * k * x[0] / a.length).cos())?
        }
    };
    let profile = match cfg.resolution {
        Some(res) => std::sync::Arc::new(solve_profile(cfg.params.b, DEFAULT_T_MAX, res)?),
        None => profile_for(cfg.params.b)?,
    };
    let ext = build_extension_with(&profile, &u, &levels)?;
    let check = trace_laplacian_check_with(&profile, &u);
    let mut rows = Vec::new();
    for (li, &t) in ext.t_levels.iter().enumerate() {
        for idx in 0..u.values.len() {
            let mut row = vec![num(t)];
            row.extend(u.coords(idx).into_iter().map(num));
            row.push(num(ext.u[li].values[idx]));
            row.push(num(ext.laplacian[li].values[idx]));
            rows.push(row);
        }
    }
    let axes = ["x1", "x2", "x3"];
    let mut head = vec!["t"];
    head.extend(&axes[..a.dim]);
    head.extend(["u", "laplacian_b"]);
    let (check_json, failure) = match check {
        Ok(c) => (json!({ "kappa": c.kappa_estimate, "relative_spread": c.relative_spread, "per_frequency": c.per_frequency }), None),
        Err(e) => (json!({ "error": e.to_string() }), Some(CliError::Lab(e))),
    };
    let body = json!({
        "dim": a.dim, "size": a.size, "length": a.length, "t_levels": levels, "J": profile.j,
        "trace_check": check_json,
        "u": ext.u.iter().map(|f| f.values.clone()).collect::<Vec<_>>(),
        "laplacian_b": ext.laplacian.iter().map(|f| f.values.clone()).collect::<Vec<_>>(),
    });
    Ok(Output {
        artifacts: vec![Artifact::csv("extension", &head, rows), Artifact::json("extension", doc(header(cfg, "extend"), body))],
        failure,
    })
}

// ---------------------------------------------------------------- synthesis

#[derive(Debug, Args, Clone)]
pub struct TermArgs {
    /// Terms as l:c1:d1[:channel], comma separated; l indexes distinct eigenvalues.
    #[arg(long)]
    pub terms: Option<String>,
}

pub fn parse_terms(s: &str) -> Result<Vec<TermSpec>, CliError> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(CliError::Usage(format!("term {item:?} must be l:c1:d1 or l:c1:d1:channel")));
        }
        let bad = |e: String| CliError::Usage(format!("term {item:?}: {e}"));
        let l = parts[0].parse::<usize>().map_err(|e| bad(e.to_string()))?;
        let c1 = parts[1].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        let d1 = parts[2].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        let channel = match parts.get(3) {
            Some(c) => c.parse::<usize>().map_err(|e| bad(e.to_string()))?,
            None => 0,
        };
        out.push(TermSpec { l, channel, c1, d1 });
    }
    if out.is_empty() {
        return Err(CliError::Usage("no terms given".into()));
    }
    Ok(out)
}

struct Synthesis {
    sol: SeparableSolution,
    modes: Vec<SpectralMode>,
}

impl Synthesis {
    fn sigmas(&self) -> Vec<f64> {
        distinct(&self.modes).iter().map(|m| m.sigma_plus).collect()
    }

    fn candidates(&self, p: &WeightParams) -> Result<Vec<Candidate>, CliError> {
        Ok(distinct(&self.modes).iter().map(|m| Candidate::from_mode(p, m)).collect::<Result<_, _>>()?)
    }
}

/// Solves enough of the spectrum to cover the requested terms, plus two more
/// distinct eigenvalues for matching and fitting.
fn synthesis(cfg: &RunConfig, t: &TermArgs) -> Result<Synthesis, CliError> {
    let text = t
        .terms
        .clone()
        .or_else(|| cfg.terms.clone())
        .ok_or_else(|| CliError::Usage("--terms is required (or `terms` in --config)".into()))?;
    let spec = parse_terms(&text)?;
    let top = spec.iter().map(|t| t.l).max().unwrap_or(0);
    let modes = hemisphere_modes(cfg, top + 3)?;
    let sol = build(&cfg.params, &modes, &spec)?;
    Ok(Synthesis { sol, modes })
}

fn terms_json(sol: &SeparableSolution) -> Vec<Value> {
    sol.terms
        .iter()
        .map(|t| {
            json!({
                "l": t.mode.l, "k": t.mode.k, "index": t.mode.index, "mu": t.mode.mu,
                "sigma": t.sigma(), "K": t.k_const, "c1": t.c1, "d1": t.d1,
            })
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub terms: TermArgs,
    /// Radial sample count on (0, R].
    #[arg(long, default_value_t = 4)]
    pub radii: usize,
    /// Polar sample count on [0, pi/2].
    #[arg(long, default_value_t = 5)]
    pub angles: usize,
}

pub fn synthesize(cfg: &RunConfig, a: &SynthesizeArgs) -> CmdResult {
    if a.radii == 0 || a.angles < 2 {
        return Err(CliError::Usage("--radii must be positive and --angles at least 2".into()));
    }
    let s = synthesis(cfg, &a.terms)?;
    let big_r = cfg.params.r;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for i in 1..=a.radii {
        let r = big_r * i as f64 / a.radii as f64;
        for j in 0..a.angles {
            let psi = std::f64::consts::FRAC_PI_2 * j as f64 / (a.angles - 1) as f64;
            let v = eval_solution(&s.sol, r, psi)?;
            rows.push(vec![num(r), num(psi), num(v.u), num(v.v)]);
            samples.push(json!({ "r": r, "psi": psi, "u": v.u, "v": v.v }));
        }
    }
    let body = json!({
        "terms": terms_json(&s.sol), "leading_exponent": s.sol.leading_exponent(), "samples": samples,
    });
    Ok(Output::ok(vec![
        Artifact::json("synthesis", doc(header(cfg, "synthesize"), body)),
        Artifact::csv("synthesis", &["r", "psi", "u", "v"], rows),
    ]))
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub terms: TermArgs,
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Sigma => "sigma",
        Branch::SigmaPlusTwo => "sigma+2",
    }
}

pub fn fit(cfg: &RunConfig, a: &FitArgs) -> CmdResult {
    let s = synthesis(cfg, &a.terms)?;
    let cands = s.candidates(&cfg.params)?;
    let mut fits = Vec::new();
    let mut rows = Vec::new();
    let mut failure = None;
    for t in &s.sol.terms {
        let samples = coefficient_samples(&s.sol, &t.mode)?;
        match fit_blowup(&samples, &cands) {
            Ok(f) => {
                rows.push(vec![
                    t.mode.l.to_string(),
                    num(t.c1),
                    num(t.d1),
                    num(f.c1_hat),
                    num(f.d1_hat),
                    num(f.sigma_used),
                    num(f.delta1),
                    f.delta2.map(num).unwrap_or_default(),
                    branch_name(f.branch).into(),
                    num(f.residual),
                ]);
                fits.push(json!({
                    "l": t.mode.l, "c1": t.c1, "d1": t.d1, "c1_hat": f.c1_hat, "d1_hat": f.d1_hat,
                    "sigma": f.sigma_used, "delta1": f.delta1, "delta2": f.delta2,
                    "branch": branch_name(f.branch), "residual": f.residual,
                }));
            }
            Err(e) => {
                fits.push(json!({ "l": t.mode.l, "error": e.to_string() }));
                failure.get_or_insert(CliError::Lab(e));
            }
        }
    }
    Ok(Output {
        artifacts: vec![
            Artifact::json("fit", doc(header(cfg, "fit"), json!({ "fits": fits }))),
            Artifact::csv("fit", &["l", "c1", "d1", "c1_hat", "d1_hat", "sigma", "delta1", "delta2", "branch", "residual"], rows),
        ],
        failure,
    })
}

// ---------------------------------------------------------------- almgren

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProvenanceArg {
    Closed,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ComponentArg {
    /// U and V jointly.
    System,
    /// U alone.
    U,
}

#[derive(Debug, Args)]
pub struct AlmgrenArgs {
    #[command(flatten)]
    pub terms: TermArgs,
    #[arg(long, value_enum, default_value_t = ProvenanceArg::Closed)]
    pub provenance: ProvenanceArg,
    #[arg(long, value_enum, default_value_t = ComponentArg::System)]
    pub component: ComponentArg,
    #[arg(long, default_value_t = 3)]
    pub decades: usize,
    #[arg(long, default_value_t = 64)]
    pub per_decade: usize,
}

pub fn almgren(cfg: &RunConfig, a: &AlmgrenArgs) -> CmdResult {
    if a.decades == 0 || a.per_decade == 0 {
        return Err(CliError::Usage("--decades and --per-decade must be positive".into()));
    }
    let s = synthesis(cfg, &a.terms)?;
    let prov = match a.provenance {
        ProvenanceArg::Closed => Provenance::ClosedForm,
        ProvenanceArg::Quadrature => Provenance::Quadrature,
    };
    let comp = match a.component {
        ComponentArg::System => Component::System,
        ComponentArg::U => Component::UOnly,
    };
    let sched = RadiusSchedule { r_max: cfg.params.r, decades: a.decades, per_decade: a.per_decade };
    let tr = trace(&s.sol, &sched, prov, comp)?;
    let rows: Vec<Vec<String>> = tr
        .records
        .iter()
        .map(|r| vec![num(r.r), num(r.d), num(r.h), num(r.n), num(r.nu1), num(r.nu2)])
        .collect();
    let sigmas = s.sigmas();
    let mut failure = None;
    let limit = match frequency_limit(&tr, &sigmas) {
        Ok(lim) => {
            if let Err(e) = lim.clone().require_match(&sigmas) {
                failure = Some(CliError::Lab(e));
            }
            json!({
                "gamma": lim.gamma, "correction_exponent": lim.correction_exponent,
                "matched_exponent": lim.matched_exponent, "matched_l": lim.matched_l,
                "branch": lim.branch.map(branch_name), "h_limit": lim.h_limit,
                "h_ratio_band": [lim.h_ratio_band.0, lim.h_ratio_band.1],
                "h_scaled_max": lim.h_scaled_max, "sandwich_constant": lim.sandwich_constant,
            })
        }
        Err(e) => {
            let v = json!({ "error": e.to_string() });
            failure = Some(CliError::Lab(e));
            v
        }
    };
    let h_res = check_H_derivative(&tr).ok();
    let (c1, c3) = fit_nu2_bound(&tr);
    let big_r = cfg.params.r;
    let pohozaev: Vec<Value> = [0.25, 0.5, 0.75]
        .iter()
        .map(|f| {
            let r = f * big_r;
            match check_pohozaev(&s.sol, r) {
                Ok((a, b)) => json!({ "r": r, "res1": a, "res2": b }),
                Err(e) => json!({ "r": r, "error": e.to_string() }),
            }
        })
        .collect();
    let min_nu1 = tr.records.iter().map(|r| r.nu1).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let body = json!({
        "terms": terms_json(&s.sol), "provenance": format!("{:?}", prov), "component": format!("{:?}", comp),
        "radii": tr.records.len(), "limit": limit, "h_derivative_residual": h_res,
        "nu2_bound": { "c1": c1, "c3": c3 }, "min_nu1": if min_nu1.is_finite() { Some(min_nu1) } else { None },
        "pohozaev": pohozaev,
    });
    Ok(Output {
        artifacts: vec![
            Artifact::csv("almgren_trace", &["r", "D", "H", "N", "nu1", "nu2"], rows),
            Artifact::json("almgren_summary", doc(header(cfg, "almgren"), body)),
        ],
        failure,
    })
}

// ---------------------------------------------------------------- inequalities

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Hardy,
    Rellich,
    Sobolev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Bumps,
    Polynomials,
    Modes,
    Mixed,
    Constants,
}

#[derive(Debug, Args)]
pub struct InequalityArgs {
    /// Inequalities to check; every one whose regime holds when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub which: Vec<Which>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Mixed)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Ball radius for the Hardy and Sobolev checks; defaults to R.
    #[arg(long)]
    pub radius: Option<f64>,
}

fn margin_json(label: &str, m: &Margin) -> Value {
    json!({ "field": label, "margin": m.value, "scale": m.scale, "relative": m.relative(), "violated": m.violated() })
}

pub fn check_inequalities(cfg: &RunConfig, a: &InequalityArgs) -> CmdResult {
    let p = cfg.params;
    // Without --which, checks outside their regime are skipped instead of failing.
    let which = if a.which.is_empty() {
        let mut w = vec![Which::Hardy];
        if p.supercritical {
            w.push(Which::Rellich);
        }
        if p.nb1() > 0.0 {
            w.push(Which::Sobolev);
        }
        w
    } else {
        a.which.clone()
    };
    let kind = match a.family {
        FamilyArg::Bumps => FamilyKind::Bumps,
        FamilyArg::Polynomials => FamilyKind::Polynomials,
        FamilyArg::Modes => FamilyKind::Modes,
        FamilyArg::Mixed => FamilyKind::Mixed,
        FamilyArg::Constants => FamilyKind::Constants,
    };
    let r = a.radius.unwrap_or(p.r);
    let members = TestFamily::new(kind, a.count, cfg.seed).generate(&p)?;
    let mut body = serde_json::Map::new();
    body.insert("family".into(), json!(format!("{kind:?}")));
    body.insert("count".into(), json!(a.count));
    body.insert("seed".into(), json!(cfg.seed));
    body.insert("radius".into(), json!(r));
    body.insert("which".into(), json!(which.iter().map(|w| format!("{w:?}").to_lowercase()).collect::<Vec<_>>()));
    let mut rows = Vec::new();
    let mut violations = 0usize;
    for w in &which {
        match w {
            Which::Hardy => {
                let ms = members.par_iter().map(|f| check_hardy_trace(&p, f, r)).collect::<Result<Vec<_>, _>>()?;
                violations += ms.iter().filter(|m| m.violated()).count();
                let list: Vec<Value> = members.iter().zip(&ms).map(|(f, m)| margin_json(&f.label(), m)).collect();
                for (f, m) in members.iter().zip(&ms) {
                    rows.push(vec!["hardy".into(), f.label(), num(m.value), num(m.scale), num(m.relative())]);
                }
                body.insert("hardy".into(), json!(list));
            }
            Which::Rellich => {
                let decaying: Vec<_> = members.iter().filter(|f| f.extent().is_some()).collect();
                let ms = decaying.par_iter().map(|f| check_hardy_rellich(&p, *f)).collect::<Result<Vec<_>, _>>()?;
                violations += ms.iter().filter(|m| m.violated()).count();
                let list: Vec<Value> = decaying.iter().zip(&ms).map(|(f, m)| margin_json(&f.label(), m)).collect();
                for (f, m) in decaying.iter().zip(&ms) {
                    rows.push(vec!["rellich".into(), f.label(), num(m.value), num(m.scale), num(m.relative())]);
                }
                body.insert("rellich".into(), json!({ "skipped_non_decaying": members.len() - decaying.len(), "margins": list }));
            }
            Which::Sobolev => {
                let est = estimate_sobolev_for(&p, &members, r, &IntegrationLayout::default())?;
                for (f, v) in members.iter().zip(&est.ratios) {
                    rows.push(vec!["sobolev".into(), f.label(), v.map(num).unwrap_or_default(), String::new(), String::new()]);
                }
                body.insert(
                    "sobolev".into(),
                    json!({
                        "constant": est.constant, "exponent": critical_exponent(&p)?, "ratios": est.ratios,
                        "skipped": est.skipped.iter().map(|(i, why)| json!({ "member": i, "reason": why })).collect::<Vec<_>>(),
                    }),
                );
            }
        }
    }
    body.insert("violations".into(), json!(violations));
    let failure = (violations > 0).then(|| CliError::Check(format!("{violations} inequality violations")));
    Ok(Output {
        artifacts: vec![
            Artifact::json("inequalities", doc(header(cfg, "check-inequalities"), Value::Object(body))),
            Artifact::csv("inequalities", &["inequality", "field", "margin", "scale", "relative"], rows),
        ],
        failure,
    })
}

// ---------------------------------------------------------------- selftest

fn check(name: &str, run: impl FnOnce() -> Result<(bool, String), CliError>) -> Value {
    let start = std::time::Instant::now();
    let (ok, detail) = match run() {
        Ok(v) => v,
        Err(e) => (false, e.to_string()),
    };
    json!({ "name": name, "pass": ok, "detail": detail, "seconds": start.elapsed().as_secs_f64() })
}

/// Quick invariant suite. Uses its own fixed parameters; --s/--N only affect
/// the inequality and synthesis checks.
pub fn selftest(cfg: &RunConfig) -> CmdResult {
    let p = cfg.params;
    let mut results = Vec::new();
    results.push(check("half-circle spectrum", || {
        let q = WeightParams::new(1.5, 1, 1.0)?;
        let modes = hemisphere_spectrum(&q, 5, DEFAULT_RESOLUTION)?;
        let err = distinct(&modes).iter().zip([0.0, 1.0, 4.0, 9.0, 16.0]).map(|(m, w)| (m.mu - w).abs()).fold(0.0, f64::max);
        Ok((err <= 1e-6, format!("max error {err:.2e}")))
    }));
    results.push(check("Bessel zeros", || {
        let o = BesselOrder::new(-0.5)?;
        let mut err: f64 = 0.0;
        for m in 1..=20 {
            err = err.max((bessel_zero(o, m)? - (m as f64 - 0.5) * std::f64::consts::PI).abs());
        }
        Ok((err <= 1e-10, format!("max error {err:.2e}")))
    }));
    results.push(check("profile b = 0", || {
        let prof = solve_profile(0.0, DEFAULT_T_MAX, DEFAULT_PROFILE_RESOLUTION)?;
        let err = (0..=200).map(|i| i as f64 / 20.0).map(|t| (prof.phi_at(t) - (1.0 + t) * (-t).exp()).abs()).fold(0.0, f64::max);
        Ok((err <= 1e-6 && (prof.j - 2.0).abs() <= 1e-5, format!("phi error {err:.2e}, J {}", prof.j)))
    }));
    let synth = || -> Result<Synthesis, CliError> {
        synthesis(cfg, &TermArgs { terms: Some("0:1:0.5,2:-0.3:1".into()) })
    };
    results.push(check("frequency and Pohozaev", || {
        let s = synth()?;
        let pure = build(&p, &s.modes, &[TermSpec { l: 1, channel: 0, c1: 1.0, d1: 0.0 }])?;
        let sig = pure.terms[0].sigma();
        let tr = trace(&pure, &RadiusSchedule::new(p.r), Provenance::ClosedForm, Component::System)?;
        let n_err = tr.records.iter().map(|r| (r.n - sig).abs()).fold(0.0, f64::max);
        let (a, b) = check_pohozaev(&s.sol, 0.5 * p.r)?;
        let tr = trace(&s.sol, &RadiusSchedule::new(p.r), Provenance::ClosedForm, Component::System)?;
        let h = check_H_derivative(&tr)?;
        let lim = frequency_limit(&tr, &s.sigmas())?;
        let ok = n_err <= 1e-10 && a.max(b) <= 1e-8 && h <= 1e-10 && lim.matched_exponent.is_some();
        Ok((ok, format!("N error {n_err:.2e}, Pohozaev {:.2e}, H' {h:.2e}, gamma {:.6}", a.max(b), lim.gamma)))
    }));
    results.push(check("blow-up fit", || {
        let s = synth()?;
        let cands = s.candidates(&p)?;
        let mut worst: f64 = 0.0;
        for t in &s.sol.terms {
            let f = fit_blowup(&coefficient_samples(&s.sol, &t.mode)?, &cands)?;
            worst = worst.max((f.c1_hat - t.c1).abs()).max((f.d1_hat - t.d1).abs());
        }
        Ok((worst <= 1e-6, format!("max coefficient error {worst:.2e}")))
    }));
    results.push(check("Hardy trace", || {
        let fam = TestFamily::new(FamilyKind::Mixed, 9, cfg.seed).generate(&p)?;
        let mut worst = f64::INFINITY;
        for f in &fam {
            worst = worst.min(check_hardy_trace(&p, f, p.r)?.relative());
        }
        let c = check_hardy_trace(&p, &ZonalField::constant(&p, 1.0), p.r)?;
        Ok((worst >= -1e-12 && !c.violated(), format!("worst relative margin {worst:.3e}")))
    }));
    let failed = results.iter().filter(|r| r["pass"] != json!(true)).count();
    let rows = results
        .iter()
        .map(|r| vec![r["name"].as_str().unwrap_or("").to_string(), r["pass"].to_string(), r["detail"].as_str().unwrap_or("").to_string()])
        .collect();
    let failure = (failed > 0).then(|| CliError::Check(format!("{failed} selftest checks failed")));
    Ok(Output {
        artifacts: vec![
            Artifact::json("selftest", doc(header(cfg, "selftest"), json!({ "checks": results, "failed": failed }))),
            Artifact::csv("selftest", &["check", "pass", "detail"], rows),
        ],
        failure,
    })
}
