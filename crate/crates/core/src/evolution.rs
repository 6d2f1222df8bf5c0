//! Outward marching of the quasi-spherical equation
//!
//! ```text
//! H0 du/dr = u^2 Lap_r u + (u - u^3) R_r / 2,   u(., 0) = u0,
//! ```
//!
//! along the parallel-surface foliation. The solution makes
//! `u^2 dr^2 + g_r` a scalar-flat metric on the exterior of the base surface.

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    add_laplacian_phi, frame_at, laplacian_theta, ConvexSurface, FoliationFrame, GridField,
};

/// Step halvings attempted after a positivity failure before giving up.
pub const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit midpoint Runge-Kutta for every term.
    #[default]
    ExplicitRk2,
    /// Midpoint RK2 for the meridional diffusion and reaction, followed by a
    /// backward-Euler azimuthal diffusion solve on each parallel.
    ThetaExplicitPhiImplicit,
}

/// Geometric output radii `first * ratio^k`, plus `r = 0` and `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputStride {
    pub first: f64,
    pub ratio: f64,
}

impl Default for OutputStride {
    fn default() -> Self {
        OutputStride {
            first: 0.05,
            ratio: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cfl_safety: f64,
    pub r_max: f64,
    pub scheme: Scheme,
    pub output_stride: OutputStride,
    pub dr_min: f64,
    pub dr_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl_safety: 0.25,
            r_max: 1000.0,
            scheme: Scheme::ExplicitRk2,
            output_stride: OutputStride::default(),
            dr_min: 1e-12,
            dr_max: 100.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety = {} must lie in (0, 1]", self.cfl_safety));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return bad(format!("r_max = {} must be positive", self.r_max));
        }
        if !(self.dr_min > 0.0 && self.dr_min <= self.dr_max) {
            return bad(format!(
                "need 0 < dr_min <= dr_max (got {}, {})",
                self.dr_min, self.dr_max
            ));
        }
        let s = self.output_stride;
        if !(s.first > 0.0 && s.ratio > 1.0) {
            return bad(format!(
                "output stride needs first > 0 and ratio > 1 (got {}, {})",
                s.first, s.ratio
            ));
        }
        Ok(())
    }

    /// Radii at which states are emitted, always starting at 0 and ending at `r_max`.
    pub fn output_radii(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut r = self.output_stride.first;
        while r < self.r_max * (1.0 - 1e-12) {
            out.push(r);
            r *= self.output_stride.ratio;
        }
        out.push(self.r_max);
        out
    }
}

/// The solution field on the leaf at distance `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiSphericalState {
    pub r: f64,
    pub u: GridField,
}

impl QuasiSphericalState {
    pub fn initial(u0: GridField) -> Result<Self> {
        if let Some((node, value)) = u0.first_non_positive() {
            return Err(Error::NonPositiveInitialData { node, value });
        }
        Ok(QuasiSphericalState { r: 0.0, u: u0 })
    }
}

/// Largest stable step for `state` on `frame`.
///
/// Uses `cfl_safety * min h^2 H0 / (4 u^2)` with `h` the smaller metric grid
/// spacing. The azimuthal spacing only enters for the fully explicit scheme on
/// non-axisymmetric fields.
pub fn select_step(
    state: &QuasiSphericalState,
    frame: &FoliationFrame,
    config: &SolverConfig,
) -> Result<f64> {
    let u = &state.u;
    let np = u.n_phi();
    let with_phi = np > 1 && config.scheme == Scheme::ExplicitRk2;
    let d_phi = 2.0 * std::f64::consts::PI / np as f64;
    let mut limit = f64::INFINITY;
    for j in 0..u.n_theta() {
        let mut h2 = frame.e[j] * frame.d_theta * frame.d_theta;
        if with_phi {
            h2 = h2.min(frame.g[j] * d_phi * d_phi);
        }
        let umax = u.ring(j).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        limit = limit.min(h2 * frame.h0[j] / (4.0 * umax * umax));
    }
    let dr = config.cfl_safety * limit;
    if dr < config.dr_min {
        return Err(Error::StepUnderflow {
            r: state.r,
            required: dr,
            dr_min: config.dr_min,
        });
    }
    Ok(dr.min(config.dr_max))
}

/// Right-hand side `du/dr`, without the azimuthal diffusion when `with_phi` is false.
fn rate(frame: &FoliationFrame, u: &GridField, with_phi: bool, out: &mut [f64]) {
    laplacian_theta(frame, u, out);
    if with_phi {
        add_laplacian_phi(frame, u, out);
    }
    let np = u.n_phi();
    let v = u.values();
    for j in 0..u.n_theta() {
        let inv_h = frame.inv_h0[j];
        let react = 0.5 * frame.scalar[j] * inv_h;
        for k in 0..np {
            let i = j * np + k;
            let x = v[i];
            out[i] = x * x * inv_h * out[i] + react * (x - x * x * x);
        }
    }
}

fn check_shape(u: &GridField, surface: &ConvexSurface) -> Result<()> {
    let (nt, np) = (u.n_theta(), u.n_phi());
    if nt != surface.n_theta() || (np != 1 && np != surface.n_phi()) {
        return Err(Error::ShapeMismatch {
            got_theta: nt,
            got_phi: np,
            want_theta: surface.n_theta(),
            want_phi: surface.n_phi(),
        });
    }
    Ok(())
}

/// Reusable buffers for repeated steps on one surface.
struct Stepper<'a> {
    surface: &'a ConvexSurface,
    config: SolverConfig,
    /// Frame at the current radius.
    start: FoliationFrame,
    mid: FoliationFrame,
    end: FoliationFrame,
    k: Vec<f64>,
    half: GridField,
}

impl<'a> Stepper<'a> {
    fn new(surface: &'a ConvexSurface, config: SolverConfig, state: &QuasiSphericalState) -> Self {
        let start = frame_at(surface, state.r);
        Stepper {
            surface,
            config,
            mid: start.clone(),
            end: start.clone(),
            start,
            k: vec![0.0; state.u.len()],
            half: state.u.clone(),
        }
    }

    /// Computes the state at `state.r + dr` into `out`; on success `self.end`
    /// holds the frame at the new radius.
    fn advance(
        &mut self,
        state: &QuasiSphericalState,
        dr: f64,
        out: &mut QuasiSphericalState,
    ) -> Result<()> {
        let explicit_phi = self.config.scheme == Scheme::ExplicitRk2;
        let r = state.r;
        let np = state.u.n_phi();
        debug_assert_eq!(self.start.r, r);

        rate(&self.start, &state.u, explicit_phi, &mut self.k);
        for ((h, u), k) in self.half.values_mut().iter_mut().zip(state.u.values()).zip(&self.k) {
            *h = u + 0.5 * dr * k;
        }
        self.mid.update(self.surface, r + 0.5 * dr);
        rate(&self.mid, &self.half, explicit_phi, &mut self.k);
        for ((n, u), k) in out.u.values_mut().iter_mut().zip(state.u.values()).zip(&self.k) {
            *n = u + dr * k;
        }
        let r_next = r + dr;
        self.end.update(self.surface, r_next);
        if !explicit_phi && np > 1 {
            implicit_phi_diffusion(&self.end, &mut out.u, dr);
        }
        out.r = r_next;

        if out.u.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { r: r_next });
        }
        if let Some((node, value)) = out.u.first_non_positive() {
            return Err(Error::PositivityLoss {
                r: r_next,
                node,
                value,
            });
        }
        Ok(())
    }

    fn commit(&mut self) {
        std::mem::swap(&mut self.start, &mut self.end);
    }
}

/// Advances `state` by `dr` with the configured scheme.
pub fn step(
    state: &QuasiSphericalState,
    surface: &ConvexSurface,
    dr: f64,
    config: &SolverConfig,
) -> Result<QuasiSphericalState> {
    check_shape(&state.u, surface)?;
    let mut stepper = Stepper::new(surface, *config, state);
    let mut out = state.clone();
    stepper.advance(state, dr, &mut out)?;
    Ok(out)
}

/// Backward-Euler step of `du/dr = (u^2 / (H0 G)) d^2u/dphi^2` on every parallel,
/// with the coefficient frozen at the incoming values.
fn implicit_phi_diffusion(frame: &FoliationFrame, u: &mut GridField, dr: f64) {
    let np = u.n_phi();
    let d_phi = 2.0 * std::f64::consts::PI / np as f64;
    let mut sub = vec![0.0; np];
    let mut diag = vec![0.0; np];
    let mut rhs = vec![0.0; np];
    for j in 0..u.n_theta() {
        let c = dr / (frame.h0[j] * frame.g[j] * d_phi * d_phi);
        let ring = &mut u.values_mut()[j * np..(j + 1) * np];
        for k in 0..np {
            let alpha = c * ring[k] * ring[k];
            sub[k] = -alpha;
            diag[k] = 1.0 + 2.0 * alpha;
            rhs[k] = ring[k];
        }
        let x = solve_cyclic(&sub, &diag, &sub, &rhs);
        ring.copy_from_slice(&x);
    }
}

/// Solves the periodic tridiagonal system
/// `lower[k] x[k-1] + diag[k] x[k] + upper[k] x[k+1] = rhs[k]` (indices mod n).
pub fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![rhs[0] / (diag[0] + lower[0] + upper[0])];
    }
    if n == 2 {
        let (a, b) = (diag[0], lower[0] + upper[0]);
        let (c, d) = (lower[1] + upper[1], diag[1]);
        let det = a * d - b * c;
        return vec![
            (rhs[0] * d - b * rhs[1]) / det,
            (a * rhs[1] - c * rhs[0]) / det,
        ];
    }
    // Sherman-Morrison on the corner entries.
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &b, upper, rhs);
    let mut w = vec![0.0; n];
    w[0] = gamma;
    w[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &b, upper, &w);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Result of a complete outward integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub state: QuasiSphericalState,
    pub steps: usize,
    pub retries: usize,
    /// `r * max |u - 1|` at the final radius; bounded for a decaying solution.
    pub decay_constant: f64,
}

/// When [`evolve_with`] calls its observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserveAt {
    OutputRadii,
    EveryStep,
}

/// Integrates from `r = 0` to `config.r_max`, calling `observer` at every output radius.
///
/// A phi-independent `u0` is evolved on one value per parallel; the states
/// passed to `observer` then have `n_phi == 1`.
pub fn evolve(
    surface: &ConvexSurface,
    u0: &GridField,
    config: &SolverConfig,
    observer: impl FnMut(&QuasiSphericalState, &FoliationFrame),
) -> Result<Evolution> {
    evolve_with(surface, u0, config, ObserveAt::OutputRadii, observer)
}

/// [`evolve`] with a choice of observation points. Every output radius is
/// still visited and observed exactly once.
pub fn evolve_with(
    surface: &ConvexSurface,
    u0: &GridField,
    config: &SolverConfig,
    at: ObserveAt,
    mut observer: impl FnMut(&QuasiSphericalState, &FoliationFrame),
) -> Result<Evolution> {
    config.validate()?;
    check_shape(u0, surface)?;
    let u0 = u0.to_axisymmetric().unwrap_or_else(|| u0.clone());
    let mut state = QuasiSphericalState::initial(u0)?;
    let mut next = state.clone();
    let mut stepper = Stepper::new(surface, *config, &state);
    let radii = config.output_radii();
    observer(&state, &stepper.start);

    let (mut steps, mut retries) = (0, 0);
    for &target in &radii[1..] {
        while state.r < target {
            let mut dr = select_step(&state, &stepper.start, config)?;
            let remaining = target - state.r;
            let mut last = dr >= remaining * (1.0 - 1e-12);
            if last {
                dr = remaining;
            }
            let mut attempt = 0;
            loop {
                match stepper.advance(&state, dr, &mut next) {
                    Ok(()) => break,
                    Err(Error::PositivityLoss { .. }) if attempt < MAX_RETRIES => {
                        attempt += 1;
                        retries += 1;
                        dr *= 0.5;
                        last = false;
                        debug!("positivity loss at r = {}, retrying with dr = {dr:e}", state.r);
                    }
                    Err(e) => return Err(e),
                }
            }
            if last && next.r != target {
                next.r = target;
                stepper.end.update(surface, target);
            }
            std::mem::swap(&mut state, &mut next);
            stepper.commit();
            steps += 1;
            if at == ObserveAt::EveryStep && state.r < target {
                observer(&state, &stepper.start);
            }
        }
        trace!("r = {:.6e}, steps = {steps}", state.r);
        observer(&state, &stepper.start);
    }
    let decay_constant = state.r * state.u.map(|v| v - 1.0).max_abs();
    Ok(Evolution {
        state,
        steps,
        retries,
        decay_constant,
    })
}
