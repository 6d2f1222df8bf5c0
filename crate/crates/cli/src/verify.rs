//! Property suite run by `qsx verify`.

use std::f64::consts::PI;

use quasisphere::bartnik::{h0_of, mu0_bounds, solve_mu0, BartnikData};
use quasisphere::evolution::{evolve, evolve_with, ObserveAt, SolverConfig};
use quasisphere::geometry::{build_surface, frame_at, integrate, laplacian, ConvexSurface, GridField, SurfaceSpec};
use quasisphere::mass::{mass_at, mass_lower_at, run_mass, ADM_NORMALIZATION};
use quasisphere::oracle::radial_solve;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::commands::Provenance;
use crate::config::{Fault, RunConfig};
use crate::error::CliError;

/// Resolution at which the unscaled tolerances apply.
pub const REFERENCE_N_THETA: usize = 64;

/// Radius the evolution checks march to.
const CHECK_RADIUS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst measured violation or error.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub seed: u64,
    pub n_theta: usize,
    /// Factor applied to discretization-dependent tolerances, `max(1, (64 / n_theta)^2)`.
    pub tolerance_scale: f64,
    pub checks: Vec<CheckResult>,
    pub provenance: Provenance,
}

pub fn tolerance_scale(n_theta: usize) -> f64 {
    let q = REFERENCE_N_THETA as f64 / n_theta as f64;
    (q * q).max(1.0)
}

struct Suite {
    checks: Vec<CheckResult>,
}

impl Suite {
    /// Records `value <= tolerance`; a NaN value fails.
    fn check(&mut self, name: &str, value: f64, tolerance: f64) {
        log::debug!("{name}: {value:e} (tolerance {tolerance:e})");
        self.checks.push(CheckResult {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
        });
    }

    fn check_error(&mut self, name: &str, err: CliError) {
        log::warn!("{name}: {err}");
        self.checks.push(CheckResult {
            name: name.into(),
            passed: false,
            value: f64::NAN,
            tolerance: 0.0,
        });
    }
}

/// Smooth field `c0 + c1 cos t + c2 cos 2t + c3 sin t cos p + c4 sin^2 t sin 2p`.
fn trig_field(s: &ConvexSurface, c: &[f64; 5]) -> GridField {
    GridField::from_fn(s, |t, p| {
        c[0] + c[1] * t.cos() + c[2] * (2.0 * t).cos() + c[3] * t.sin() * p.cos() + c[4] * t.sin().powi(2) * (2.0 * p).sin()
    })
}

fn random_coefficients(rng: &mut StdRng, amplitude: f64) -> [f64; 5] {
    let mut c = [0.0; 5];
    for x in c.iter_mut() {
        *x = rng.gen_range(-amplitude..amplitude);
    }
    c
}

/// Positive field `1 + sum` with coefficients small enough to stay above 0.5.
fn random_positive(rng: &mut StdRng, s: &ConvexSurface) -> GridField {
    let mut c = random_coefficients(rng, 0.12);
    c[0] = 1.0;
    trig_field(s, &c)
}

fn capped(solver: &SolverConfig, r_max: f64) -> SolverConfig {
    SolverConfig {
        r_max: solver.r_max.min(r_max),
        ..*solver
    }
}

fn geometry_checks(suite: &mut Suite, rng: &mut StdRng, surface: &ConvexSurface, cases: usize) {
    // area(r) is a quadratic with leading coefficient 4 pi
    let mut worst: f64 = 0.0;
    for r in [0.5, 5.0, 50.0] {
        let (a0, a1, a2) = (frame_at(surface, 0.0).area(), frame_at(surface, r).area(), frame_at(surface, 2.0 * r).area());
        worst = worst.max(((a2 - 2.0 * a1 + a0) / (2.0 * r * r) / (4.0 * PI) - 1.0).abs());
    }
    suite.check("area_leading_coefficient", worst, 1e-9);

    let (mut div, mut sym, mut energy): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
    for _ in 0..cases {
        let r = rng.gen_range(0.0..20.0);
        let frame = frame_at(surface, r);
        let f = trig_field(surface, &random_coefficients(rng, 2.0));
        let g = trig_field(surface, &random_coefficients(rng, 2.0));
        let (lf, lg) = (laplacian(&frame, &f), laplacian(&frame, &g));
        let scale = integrate(&frame, &lf.map(f64::abs)).max(1e-300);
        div = div.max(integrate(&frame, &lf).abs() / scale);
        let fg = integrate(&frame, &f.zip_with(&lg, |a, b| a * b));
        let gf = integrate(&frame, &g.zip_with(&lf, |a, b| a * b));
        sym = sym.max((fg - gf).abs() / (1.0 + fg.abs()));
        energy = energy.max(integrate(&frame, &f.zip_with(&lf, |a, b| a * b)));
    }
    suite.check("laplacian_divergence_free", div, 1e-12);
    suite.check("laplacian_symmetric", sym, 1e-10);
    suite.check("laplacian_non_positive", energy, 1e-10);
}

fn consistency_checks(suite: &mut Suite, n: usize, scale: f64) -> Result<(), CliError> {
    // zonal harmonic on the concentric spheres: Lap cos = -2 cos / rho^2
    let sphere = build_surface(&SurfaceSpec::sphere(1.0, n).with_n_phi(8))?;
    let r = 0.5;
    let out = laplacian(&frame_at(&sphere, r), &GridField::axisymmetric(&sphere, f64::cos));
    let err = (0..n)
        .map(|j| (out.get(j, 0) + 2.0 * sphere.theta(j).cos() / ((1.0 + r) * (1.0 + r))).abs())
        .fold(0.0, f64::max);
    suite.check("laplacian_zonal_harmonic", err, 5e-4 * scale);
    Ok(())
}

fn evolution_checks(
    suite: &mut Suite,
    rng: &mut StdRng,
    surface: &ConvexSurface,
    solver: &SolverConfig,
    fault: Option<Fault>,
) -> Result<(), CliError> {
    let (nt, np) = (surface.n_theta(), surface.n_phi());
    let cfg = capped(solver, CHECK_RADIUS);

    let mut drift: f64 = 0.0;
    let mut mass: f64 = 0.0;
    evolve(surface, &GridField::constant(nt, 1, 1.0), &cfg, |st, frame| {
        drift = drift.max(st.u.map(|v| v - 1.0).max_abs());
        mass = mass.max(mass_at(frame, &st.u).abs().max(mass_lower_at(frame, &st.u).abs()) / ADM_NORMALIZATION);
    })?;
    suite.check("flat_data_stays_flat", drift, 1e-12);
    suite.check("flat_data_massless", mass, 1e-10);

    // per-step functionals of a random positive field
    let u0 = random_positive(rng, surface);
    let mut steps: Vec<(f64, f64)> = Vec::new();
    evolve_with(surface, &u0, &cfg, ObserveAt::EveryStep, |st, frame| {
        steps.push((mass_at(frame, &st.u), mass_lower_at(frame, &st.u)));
    })?;
    if fault == Some(Fault::BrokenMonotonicity) {
        let last = steps.len() - 1;
        steps.swap(0, last);
    }
    let upper_increase = steps.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::NEG_INFINITY, f64::max);
    let lower_decrease = steps.windows(2).map(|w| w[0].1 - w[1].1).fold(f64::NEG_INFINITY, f64::max);
    let order = steps.iter().map(|(u, l)| l - u).fold(f64::NEG_INFINITY, f64::max);
    suite.check("upper_mass_non_increasing", upper_increase, 1e-8);
    suite.check("lower_mass_non_decreasing", lower_decrease, 1e-8);
    suite.check("lower_below_upper", order, 1e-12);

    // comparison principle: u0 >= v0 implies u >= v
    let v0 = GridField::constant(nt, np, u0.min());
    let mut pairs = vec![(GridField::constant(nt, 1, 1.5), GridField::constant(nt, 1, 1.2)), (u0, v0)];
    let mut worst: f64 = f64::NEG_INFINITY;
    for (a, b) in pairs.drain(..) {
        let mut us = Vec::new();
        let mut vs = Vec::new();
        evolve(surface, &a, &cfg, |st, _| us.push(st.u.clone()))?;
        evolve(surface, &b, &cfg, |st, _| vs.push(st.u.clone()))?;
        for (u, v) in us.iter().zip(&vs) {
            let np = u.n_phi().max(v.n_phi());
            worst = worst.max(-u.expand(np).zip_with(&v.expand(np), |x, y| x - y).min());
        }
    }
    suite.check("comparison_principle", worst, 1e-8);
    Ok(())
}

fn schwarzschild_check(suite: &mut Suite, n: usize, solver: &SolverConfig, scale: f64) -> Result<(), CliError> {
    let sphere = build_surface(&SurfaceSpec::sphere(1.0, n).with_n_phi(8))?;
    let exact = radial_solve(1.0, 2.0)?.m;
    let cfg = SolverConfig {
        r_max: 1000.0,
        ..*solver
    };
    let est = run_mass(&sphere, &GridField::constant(n, 1, 2.0), &cfg, false)?.fit()?;
    suite.check("schwarzschild_mass", (est.value - exact).abs(), 1e-3 * scale);
    let outside = (est.bracket_lo - exact).max(exact - est.bracket_hi).max(0.0);
    suite.check("schwarzschild_bracket", outside, 1e-3 * (scale - 1.0));
    Ok(())
}

fn bartnik_checks(
    suite: &mut Suite,
    rng: &mut StdRng,
    surface: &ConvexSurface,
    config: &RunConfig,
    cases: usize,
) -> Result<(), CliError> {
    let nt = surface.n_theta();
    let mut order: f64 = f64::NEG_INFINITY;
    let mut scaling: f64 = 0.0;
    for _ in 0..cases {
        let mut c = random_coefficients(rng, 0.4);
        c[0] = 2.0;
        c[3] = 0.0;
        c[4] = 0.0;
        let h = trig_field(surface, &c);
        let data = BartnikData::new(surface.clone(), h.clone())?;
        let (lo, hi) = mu0_bounds(&data);
        order = order.max(lo / hi - 1.0);
        let k = rng.gen_range(0.25..4.0);
        let (lo2, hi2) = mu0_bounds(&BartnikData::new(surface.clone(), h.scale(k))?);
        scaling = scaling.max((lo2 * k / lo - 1.0).abs()).max((hi2 * k / hi - 1.0).abs());
    }
    suite.check("mu0_bounds_ordered", order, 1e-12);
    suite.check("mu0_bounds_scale_inversely", scaling, 1e-12);

    let unit = BartnikData::new(surface.clone(), GridField::constant(nt, 1, 1.0))?;
    let data = BartnikData::new(surface.clone(), h0_of(&unit))?;
    let res = solve_mu0(&data, &config.solver, &config.mu0_options())?;
    suite.check("euclidean_mu0", (res.mu0 - 1.0).abs(), config.mu_tol + res.certified_error());
    suite.check("euclidean_detected", if res.is_euclidean_case { 0.0 } else { 1.0 }, 0.0);
    Ok(())
}

/// Runs every check; a check that errors is recorded as failed.
pub fn run_suite(config: &RunConfig) -> Result<VerifyReport, CliError> {
    let surface = config.build_surface()?;
    let n = surface.n_theta();
    let scale = tolerance_scale(n);
    let opts = &config.verify;
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut suite = Suite { checks: Vec::new() };

    geometry_checks(&mut suite, &mut rng, &surface, opts.cases);
    if let Err(e) = consistency_checks(&mut suite, n, scale) {
        suite.check_error("laplacian_zonal_harmonic", e);
    }
    if let Err(e) = evolution_checks(&mut suite, &mut rng, &surface, &config.solver, opts.inject_fault) {
        suite.check_error("evolution", e);
    }
    if let Err(e) = schwarzschild_check(&mut suite, n, &config.solver, scale) {
        suite.check_error("schwarzschild_mass", e);
    }
    if let Err(e) = bartnik_checks(&mut suite, &mut rng, &surface, config, opts.cases) {
        suite.check_error("mu0", e);
    }

    Ok(VerifyReport {
        passed: suite.checks.iter().all(|c| c.passed),
        seed: opts.seed,
        n_theta: n,
        tolerance_scale: scale,
        checks: suite.checks,
        provenance: Provenance::of(config),
    })
}
