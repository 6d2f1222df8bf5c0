//! Bartnik data `(surface, H)` and the critical scaling `mu0`.
//!
//! For `mu > 0` let `m(mu)` be the total mass of the extension with initial
//! data `u0 = H0 / (mu H)`. It is strictly decreasing in `mu` and vanishes at
//! a single `mu0`, which bounds from above the largest scaling of `H` that
//! admits a fill-in of nonnegative scalar curvature.

use std::cmp::Ordering;
use std::f64::consts::PI;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::SolverConfig;
use crate::geometry::{frame_at, integrate, ConvexSurface, GridField};
use crate::mass::{run_mass, MassEstimate};

/// Relative sup-norm threshold below which `H` counts as a multiple of `H0`.
pub const PROPORTIONALITY_THRESHOLD: f64 = 1e-8;

/// Fraction by which the analytic bounds are widened before bisection.
const BRACKET_WIDENING: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct BartnikData {
    surface: ConvexSurface,
    h: GridField,
}

impl BartnikData {
    /// `h` may be axisymmetric (`n_phi == 1`) or sampled on the full grid.
    pub fn new(surface: ConvexSurface, h: GridField) -> Result<Self> {
        let want_phi = surface.n_phi();
        if h.n_theta() != surface.n_theta() || (h.n_phi() != 1 && h.n_phi() != want_phi) {
            return Err(Error::ShapeMismatch {
                got_theta: h.n_theta(),
                got_phi: h.n_phi(),
                want_theta: surface.n_theta(),
                want_phi,
            });
        }
        if let Some((node, value)) = h.first_non_positive() {
            return Err(Error::NonPositiveMeanCurvature { node, value });
        }
        let h = h.to_axisymmetric().unwrap_or(h);
        Ok(BartnikData { surface, h })
    }

    pub fn surface(&self) -> &ConvexSurface {
        &self.surface
    }

    pub fn h(&self) -> &GridField {
        &self.h
    }

    /// Initial data `H0 / (mu H)` of the extension of `(surface, mu H)`.
    pub fn initial_data(&self, mu: f64) -> GridField {
        h0_of(self).zip_with(&self.h, |h0, h| h0 / (mu * h))
    }
}

/// Mean curvature of the embedding, one value per parallel.
pub fn h0_of(data: &BartnikData) -> GridField {
    frame_at(&data.surface, 0.0).mean_curvature_field()
}

/// Integrals `(int H0, int H, int H^2 / H0)` over the surface.
fn moments(data: &BartnikData) -> (f64, f64, f64) {
    let frame = frame_at(&data.surface, 0.0);
    let h0 = frame.mean_curvature_field();
    let ratio = data.h.zip_with(&h0, |h, h0| h * h / h0);
    (integrate(&frame, &h0), integrate(&frame, &data.h), integrate(&frame, &ratio))
}

/// `(sqrt(int H0 / int (H^2 / H0)), int H0 / int H)`.
pub fn mu0_bounds(data: &BartnikData) -> (f64, f64) {
    let (a, b, c) = moments(data);
    ((a / c).sqrt(), a / b)
}

/// Estimated quadrature error of the upper bound, from the same integrals on
/// cells merged in pairs.
fn quadrature_error(data: &BartnikData) -> f64 {
    let frame = frame_at(&data.surface, 0.0);
    let n = frame.n_theta();
    if n < 4 {
        return 0.0;
    }
    let np = data.h.n_phi();
    let mean = |j: usize| data.h.ring(j).iter().sum::<f64>() / np as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for j in (0..n - 1).step_by(2) {
        let w = frame.density[j] + frame.density[j + 1];
        a += w * 0.5 * (frame.h0[j] + frame.h0[j + 1]);
        b += w * 0.5 * (mean(j) + mean(j + 1));
    }
    let coarse = a / b;
    let fine = mu0_bounds(data).1;
    (fine - coarse).abs() / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportionality {
    pub is_proportional: bool,
    /// `int H0 / int H`, reported whether or not the test passes.
    pub k: f64,
}

pub fn proportionality_diagnostic(data: &BartnikData) -> Proportionality {
    let h0 = h0_of(data);
    let k = mu0_bounds(data).1;
    let dev = h0.zip_with(&data.h, |a, b| a - k * b).max_abs();
    Proportionality {
        is_proportional: dev / h0.max_abs() < PROPORTIONALITY_THRESHOLD,
        k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mu0Options {
    /// Relative width of the final `mu` bracket.
    pub mu_tol: f64,
    /// Largest acceptable width of each mass bracket, ADM units.
    pub mass_tol: f64,
    pub max_iterations: usize,
}

impl Default for Mu0Options {
    fn default() -> Self {
        Mu0Options {
            mu_tol: 1e-4,
            mass_tol: 1e-3,
            max_iterations: 60,
        }
    }
}

impl Mu0Options {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_tol > 0.0 && self.mu_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu_tol must be positive, got {}", self.mu_tol)));
        }
        if !(self.mass_tol > 0.0 && self.mass_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mass_tol must be positive, got {}",
                self.mass_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mu0Result {
    pub mu0: f64,
    pub bracket: (f64, f64),
    pub mass_at_lo: f64,
    pub mass_at_hi: f64,
    pub analytic_lower: f64,
    pub analytic_upper: f64,
    pub iterations: usize,
    pub lambda0_upper_bound: f64,
    pub is_euclidean_case: bool,
    pub quadrature_error: f64,
}

impl Mu0Result {
    /// Error on `mu0` that a certificate margin has to cover.
    pub fn certified_error(&self) -> f64 {
        (self.bracket.1 - self.bracket.0) + self.quadrature_error
    }
}

/// Total mass of the extension of `(surface, mu H)`.
pub fn mass_of_scaling(data: &BartnikData, mu: f64, solver: &SolverConfig) -> Result<MassEstimate> {
    let run = run_mass(&data.surface, &data.initial_data(mu), solver, false)?;
    run.fit()
}

/// Sign of the mass, decided by its certified bracket when possible.
fn mass_sign(est: &MassEstimate) -> Ordering {
    if est.bracket_lo > 0.0 {
        Ordering::Greater
    } else if est.bracket_hi < 0.0 {
        Ordering::Less
    } else {
        est.value.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
    }
}

fn probe(data: &BartnikData, mu: f64, solver: &SolverConfig, opts: &Mu0Options) -> Result<MassEstimate> {
    let run = run_mass(&data.surface, &data.initial_data(mu), solver, false)?;
    let est = run.estimate(opts.mass_tol)?;
    debug!(
        "mu = {mu:.12}: mass {:.6e} in [{:.6e}, {:.6e}], {} steps",
        est.value, est.bracket_lo, est.bracket_hi, run.evolution.steps
    );
    Ok(est)
}

/// Bisects `mu -> m(mu)` starting from the widened analytic bounds.
pub fn solve_mu0(data: &BartnikData, solver: &SolverConfig, opts: &Mu0Options) -> Result<Mu0Result> {
    solver.validate()?;
    opts.validate()?;
    let (analytic_lower, analytic_upper) = mu0_bounds(data);
    let is_euclidean_case = proportionality_diagnostic(data).is_proportional;
    let mut lo = analytic_lower.min(analytic_upper) * (1.0 - BRACKET_WIDENING);
    let mut hi = analytic_upper.max(analytic_lower) * (1.0 + BRACKET_WIDENING);
    // targets without threads run the two probes in turn
    let (m_lo, m_hi) = std::thread::scope(|s| {
        match std::thread::Builder::new().spawn_scoped(s, || probe(data, lo, solver, opts)) {
            Ok(a) => {
                let b = probe(data, hi, solver, opts);
                (a.join().expect("mass probe panicked"), b)
            }
            Err(_) => (probe(data, lo, solver, opts), probe(data, hi, solver, opts)),
        }
    });
    let (mut m_lo, mut m_hi) = (m_lo?, m_hi?);
    if mass_sign(&m_lo) == Ordering::Less || mass_sign(&m_hi) == Ordering::Greater {
        return Err(Error::BracketFailure {
            mu_lo: lo,
            mu_hi: hi,
            mass_lo: m_lo.value,
            mass_hi: m_hi.value,
        });
    }
    let mut iterations = 0;
    let mut mu0 = 0.5 * (lo + hi);
    while iterations < opts.max_iterations {
        mu0 = 0.5 * (lo + hi);
        if hi - lo < opts.mu_tol * mu0 {
            break;
        }
        iterations += 1;
        let m = probe(data, mu0, solver, opts)?;
        let straddles = m.bracket_lo <= 0.0 && m.bracket_hi >= 0.0;
        if straddles && m.width() < opts.mass_tol {
            // the root is enclosed as tightly as the mass itself is known
            (lo, m_lo) = (mu0, m);
            (hi, m_hi) = (mu0, m);
            break;
        }
        match mass_sign(&m) {
            Ordering::Greater => (lo, m_lo) = (mu0, m),
            Ordering::Less => (hi, m_hi) = (mu0, m),
            Ordering::Equal => {
                (lo, m_lo) = (mu0, m);
                (hi, m_hi) = (mu0, m);
                break;
            }
        }
    }
    info!("mu0 = {mu0:.10} in [{lo:.10}, {hi:.10}] after {iterations} bisections");
    Ok(Mu0Result {
        mu0,
        bracket: (lo, hi),
        mass_at_lo: m_lo.value,
        mass_at_hi: m_hi.value,
        analytic_lower,
        analytic_upper,
        iterations,
        lambda0_upper_bound: mu0,
        is_euclidean_case,
        quadrature_error: quadrature_error(data),
    })
}

/// `(m1, m2)` with `m1 = sqrt(|S| / 16 pi) (1 - (int H / int H0)^2)` and
/// `m2 = sqrt(|S| / 16 pi) (1 - 1 / mu0^2)`.
pub fn quasilocal_masses(data: &BartnikData, mu0: f64) -> (f64, f64) {
    let scale = (data.surface.area() / (16.0 * PI)).sqrt();
    let (a, b, _) = moments(data);
    let m1 = scale * (1.0 - (b / a).powi(2));
    let m2 = scale * (1.0 - 1.0 / (mu0 * mu0));
    (m1, m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    /// No fill-in of nonnegative scalar curvature exists.
    Granted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub status: CertificateStatus,
    /// `H_hat = mu0 H = H0` within tolerance, where a flat fill-in exists.
    pub exceptional_case: bool,
    pub mu0: f64,
    pub margin: f64,
    pub required_margin: f64,
    /// Smallest `H_hat / H` over the grid.
    pub min_ratio: f64,
    /// Node attaining `min_ratio`, as `(j, k)`.
    pub worst_node: (usize, usize),
}

/// Checks `H_hat >= (mu0 + margin) H` nodewise.
pub fn certify_no_fill_in(
    data: &BartnikData,
    h_hat: &GridField,
    mu0: &Mu0Result,
    margin: f64,
) -> Result<Certificate> {
    if h_hat.n_theta() != data.h.n_theta() {
        return Err(Error::ShapeMismatch {
            got_theta: h_hat.n_theta(),
            got_phi: h_hat.n_phi(),
            want_theta: data.h.n_theta(),
            want_phi: data.h.n_phi(),
        });
    }
    if let Some((node, value)) = h_hat.first_non_positive() {
        return Err(Error::NonPositiveMeanCurvature { node, value });
    }
    let required = mu0.certified_error();
    if !(margin >= required) {
        return Err(Error::MarginTooSmall { margin, required });
    }
    let ratio = h_hat.zip_with(&data.h, |a, b| a / b);
    let np = ratio.n_phi();
    let (idx, min_ratio) = ratio
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });

    let tol = 10.0 * required.max(PROPORTIONALITY_THRESHOLD);
    let h0 = h0_of(data);
    let scale = h0.max_abs();
    let matches_scaled = h_hat.zip_with(&data.h, |a, b| a - mu0.mu0 * b).max_abs() <= tol * scale;
    let matches_h0 = h_hat.zip_with(&h0, |a, b| a - b).max_abs() <= tol * scale;
    let exceptional_case = matches_scaled && matches_h0;

    let status = if min_ratio >= mu0.mu0 + margin && !exceptional_case {
        CertificateStatus::Granted
    } else {
        CertificateStatus::Inconclusive
    };
    Ok(Certificate {
        status,
        exceptional_case,
        mu0: mu0.mu0,
        margin,
        required_margin: required,
        min_ratio,
        worst_node: (idx / np, idx % np),
    })
}
