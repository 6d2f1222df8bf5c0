//! Mass functionals along the evolution.
//!
//! `m_upper(r) = int H0 (1 - 1/u)` is non-increasing in `r` and
//! `m_lower(r) = (1/2) int H0 (1 - 1/u^2)` is non-decreasing; both converge to
//! the same limit, which is `8 pi` times the ADM mass of the extension.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve_with, Evolution, ObserveAt, QuasiSphericalState, SolverConfig};
use crate::geometry::{
    add_laplacian_phi, integrate, laplacian, laplacian_theta, ConvexSurface, FoliationFrame, GridField,
};

/// Ratio between the limit of `m_upper` and the ADM mass in three dimensions.
pub const ADM_NORMALIZATION: f64 = 8.0 * PI;

fn integrate_with(frame: &FoliationFrame, u: &GridField, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let np = u.n_phi();
    (0..frame.n_theta())
        .map(|j| {
            let (h0, sc) = (frame.h0[j], frame.scalar[j]);
            frame.weight(j, np) * u.ring(j).iter().map(|v| f(h0, sc, *v)).sum::<f64>()
        })
        .sum()
}

/// `int H0 (1 - 1/u) dsigma_r`.
pub fn mass_at(frame: &FoliationFrame, u: &GridField) -> f64 {
    integrate_with(frame, u, |h0, _, v| h0 * (1.0 - 1.0 / v))
}

/// `(1/2) int H0 (1 - 1/u^2) dsigma_r`.
pub fn mass_lower_at(frame: &FoliationFrame, u: &GridField) -> f64 {
    0.5 * integrate_with(frame, u, |h0, _, v| h0 * (1.0 - 1.0 / (v * v)))
}

/// `d m_upper / dr = -(1/2) int R_r (1 - u)^2 / u dsigma_r`.
pub fn mass_rate_at(frame: &FoliationFrame, u: &GridField) -> f64 {
    -0.5 * integrate_with(frame, u, |_, sc, v| sc * (1.0 - v) * (1.0 - v) / v)
}

/// `d m_lower / dr = int u^{-1} Laplacian(u) dsigma_r`, which is nonnegative.
pub fn mass_lower_rate_at(frame: &FoliationFrame, u: &GridField) -> f64 {
    integrate(frame, &u.zip_with(&laplacian(frame, u), |v, l| l / v))
}

/// `(m_upper, m_lower, d m_upper / dr, d m_lower / dr)` in one pass.
fn functionals(frame: &FoliationFrame, u: &GridField, lap: &mut Vec<f64>) -> [f64; 4] {
    lap.resize(u.len(), 0.0);
    laplacian_theta(frame, u, lap);
    add_laplacian_phi(frame, u, lap);
    let np = u.n_phi();
    let mut acc = [0.0; 4];
    for j in 0..frame.n_theta() {
        let (h0, sc) = (frame.h0[j], frame.scalar[j]);
        let mut ring = [0.0; 4];
        for (v, l) in u.ring(j).iter().zip(&lap[j * np..(j + 1) * np]) {
            let inv = 1.0 / v;
            ring[0] += h0 * (1.0 - inv);
            ring[1] += h0 * (1.0 - inv * inv);
            ring[2] += sc * (1.0 - v) * (1.0 - v) * inv;
            ring[3] += l * inv;
        }
        let w = frame.weight(j, np);
        for (a, r) in acc.iter_mut().zip(ring) {
            *a += w * r;
        }
    }
    [acc[0], 0.5 * acc[1], -0.5 * acc[2], acc[3]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSample {
    pub r: f64,
    pub upper: f64,
    pub lower: f64,
    /// Derivative of `upper` predicted by the monotonicity identity.
    pub rate: f64,
    /// Derivative of `lower`.
    pub lower_rate: f64,
    /// Area-weighted mean of `u - 1` on the leaf.
    pub mean_offset: f64,
    /// Accumulated time-discretization error of `upper`, estimated from the
    /// mismatch between each step's change and the integrated rate.
    pub upper_error: f64,
    /// Same for `lower`.
    pub lower_error: f64,
}

impl MassSample {
    pub fn observe(frame: &FoliationFrame, u: &GridField) -> Self {
        let area = frame.area();
        MassSample {
            r: frame.r,
            upper: mass_at(frame, u),
            lower: mass_lower_at(frame, u),
            rate: mass_rate_at(frame, u),
            lower_rate: mass_lower_rate_at(frame, u),
            mean_offset: integrate(frame, &u.map(|v| v - 1.0)) / area,
            upper_error: 0.0,
            lower_error: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MassSeries {
    pub samples: Vec<MassSample>,
}

impl MassSeries {
    pub fn push(&mut self, s: MassSample) {
        self.samples.push(s);
    }

    pub fn last(&self) -> Option<&MassSample> {
        self.samples.last()
    }

    /// CSV with header `r,m_upper,m_lower` in ADM units, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,m_upper,m_lower\n");
        for s in &self.samples {
            let (u, l) = (s.upper / ADM_NORMALIZATION, s.lower / ADM_NORMALIZATION);
            writeln!(out, "{},{},{}", fmt17(s.r), fmt17(u), fmt17(l)).unwrap();
        }
        out
    }

    /// Largest increase of `upper` between consecutive samples.
    pub fn worst_upper_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[1].upper - w[0].upper)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest decrease of `lower` between consecutive samples.
    pub fn worst_lower_decrease(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].lower - w[1].lower)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Extrapolated total mass in ADM units, with the bracket from the two
/// monotone functionals at the final radius, each widened by its accumulated
/// time-stepping error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub value: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    /// RMS of the `m_inf + a / r` fit, ADM units.
    pub residual: f64,
    pub r_final: f64,
}

impl MassEstimate {
    pub fn bracket(&self) -> (f64, f64) {
        (self.bracket_lo, self.bracket_hi)
    }

    pub fn width(&self) -> f64 {
        self.bracket_hi - self.bracket_lo
    }
}

/// Least-squares fit `y = a + b x`; returns `(a, b, rms)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (a + b * x - y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (a, b, rms)
}

fn last_decade(series: &MassSeries) -> Result<&[MassSample]> {
    let s = &series.samples;
    if s.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples, need at least 3",
            s.len()
        )));
    }
    let r_final = s[s.len() - 1].r;
    let first_positive = s.iter().map(|x| x.r).find(|r| *r > 0.0).unwrap_or(r_final);
    if r_final < 10.0 * first_positive {
        return Err(Error::InsufficientSamples(format!(
            "samples span [{first_positive}, {r_final}], less than a decade"
        )));
    }
    let start = s.partition_point(|x| x.r < 0.1 * r_final);
    let tail = &s[start..];
    if tail.len() < 2 {
        return Err(Error::InsufficientSamples(
            "fewer than two samples in the last decade".into(),
        ));
    }
    Ok(tail)
}

/// Fits `m_upper ~ m_inf + a / r` over the last decade of samples.
pub fn fit_mass(series: &MassSeries) -> Result<MassEstimate> {
    let tail = last_decade(series)?;
    let xs: Vec<f64> = tail.iter().map(|s| 1.0 / s.r).collect();
    let ys: Vec<f64> = tail.iter().map(|s| s.upper).collect();
    let (m_inf, _, rms) = linear_fit(&xs, &ys);
    let last = tail[tail.len() - 1];
    let lo = (last.lower - last.lower_error) / ADM_NORMALIZATION;
    let hi = (last.upper + last.upper_error) / ADM_NORMALIZATION;
    Ok(MassEstimate {
        value: (m_inf / ADM_NORMALIZATION).clamp(lo.min(hi), hi.max(lo)),
        bracket_lo: lo,
        bracket_hi: hi,
        residual: rms / ADM_NORMALIZATION,
        r_final: last.r,
    })
}

/// [`fit_mass`], failing with `NotConverged` when the bracket is wider than `tol`.
pub fn estimate_mass(series: &MassSeries, tol: f64) -> Result<MassEstimate> {
    let est = fit_mass(series)?;
    if est.width() > tol {
        return Err(Error::NotConverged {
            width: est.width(),
            tol,
            r_final: est.r_final,
        });
    }
    Ok(est)
}

/// Slope `A` of `mean(u - 1) ~ A / r` over the last decade, from a fit of
/// `r mean(u - 1) = A + B / r`.
pub fn far_field_coefficient(series: &MassSeries) -> Result<f64> {
    let tail = last_decade(series)?;
    let xs: Vec<f64> = tail.iter().map(|s| 1.0 / s.r).collect();
    let ys: Vec<f64> = tail.iter().map(|s| s.r * s.mean_offset).collect();
    Ok(linear_fit(&xs, &ys).0)
}

/// Worst step-to-step violations of the two monotonicity properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMonotonicity {
    /// Largest increase of `m_upper` over a single step.
    pub upper_increase: f64,
    /// Largest decrease of `m_lower` over a single step.
    pub lower_decrease: f64,
    /// Largest `m_lower - m_upper` seen at any step.
    pub order_violation: f64,
}

/// An evolution together with its sampled mass functionals.
#[derive(Debug, Clone)]
pub struct MassRun {
    pub series: MassSeries,
    pub evolution: Evolution,
    /// Every emitted state, when requested.
    pub states: Vec<QuasiSphericalState>,
    pub monotonicity: StepMonotonicity,
}

impl MassRun {
    pub fn fit(&self) -> Result<MassEstimate> {
        fit_mass(&self.series)
    }

    pub fn estimate(&self, tol: f64) -> Result<MassEstimate> {
        estimate_mass(&self.series, tol)
    }
}

/// Evolves `u0` and records the mass functionals at every output radius.
///
/// The functionals are evaluated after every step to track monotonicity and
/// the time-stepping error.
pub fn run_mass(
    surface: &ConvexSurface,
    u0: &GridField,
    config: &SolverConfig,
    keep_states: bool,
) -> Result<MassRun> {
    let radii = config.output_radii();
    let mut next_output = 0;
    let mut series = MassSeries::default();
    let mut states = Vec::new();
    let mut buf = Vec::new();
    let mut prev: Option<MassSample> = None;
    let (mut upper_error, mut lower_error) = (0.0, 0.0);
    let mut mono = StepMonotonicity {
        upper_increase: f64::NEG_INFINITY,
        lower_decrease: f64::NEG_INFINITY,
        order_violation: f64::NEG_INFINITY,
    };
    let evolution = evolve_with(surface, u0, config, ObserveAt::EveryStep, |state, frame| {
        let u = &state.u;
        let [upper, lower, rate, lower_rate] = functionals(frame, u, &mut buf);
        let mut sample = MassSample {
            r: frame.r,
            upper,
            lower,
            rate,
            lower_rate,
            mean_offset: 0.0,
            upper_error: 0.0,
            lower_error: 0.0,
        };
        if let Some(p) = prev {
            let dr = sample.r - p.r;
            upper_error += (sample.upper - p.upper - 0.5 * (sample.rate + p.rate) * dr).abs();
            lower_error += (sample.lower - p.lower - 0.5 * (sample.lower_rate + p.lower_rate) * dr).abs();
            mono.upper_increase = mono.upper_increase.max(sample.upper - p.upper);
            mono.lower_decrease = mono.lower_decrease.max(p.lower - sample.lower);
        }
        mono.order_violation = mono.order_violation.max(sample.lower - sample.upper);
        prev = Some(sample);
        if radii.get(next_output) == Some(&state.r) {
            next_output += 1;
            sample.mean_offset = integrate(frame, &u.map(|v| v - 1.0)) / frame.area();
            sample.upper_error = upper_error;
            sample.lower_error = lower_error;
            series.push(sample);
            if keep_states {
                states.push(state.clone());
            }
        }
    })?;
    Ok(MassRun {
        series,
        evolution,
        states,
        monotonicity: mono,
    })
}
