//! Reference computations that do not share code paths with the solver.
//!
//! On concentric round spheres the quasi-spherical equation reduces to the
//! radial ODE `2 rho u' = u - u^3`, solved in closed form by the
//! Schwarzschild profile `u = (1 - 2m/rho)^(-1/2)`. [`radial_solve`] returns
//! the closed form after checking it against an adaptive Dormand-Prince
//! integration of the ODE.

use serde::Serialize;

use crate::error::{Error, Result};

/// Closed-form solution of the radial reduction started from `u(rho0) = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSolution {
    pub rho0: f64,
    pub c: f64,
    /// Schwarzschild mass parameter `(rho0 / 2)(1 - c^-2)`.
    pub m: f64,
}

impl RadialSolution {
    pub fn closed_form(rho0: f64, c: f64) -> Self {
        RadialSolution {
            rho0,
            c,
            m: 0.5 * rho0 * (1.0 - 1.0 / (c * c)),
        }
    }

    pub fn u(&self, rho: f64) -> f64 {
        if self.c == 1.0 {
            return 1.0;
        }
        (1.0 - 2.0 * self.m / rho).powf(-0.5)
    }

    /// `m(u0; r)` of the round sphere of radius `rho`: `8 pi rho (1 - sqrt(1 - 2m/rho))`.
    pub fn upper_mass(&self, rho: f64) -> f64 {
        8.0 * std::f64::consts::PI * rho * (1.0 - (1.0 - 2.0 * self.m / rho).sqrt())
    }

    /// The lower functional `(1/2) int H0 (1 - u^-2)`, constant `8 pi m` on spheres.
    pub fn lower_mass(&self) -> f64 {
        8.0 * std::f64::consts::PI * self.m
    }
}

/// Closed-form radial solution, cross-checked against direct integration out to `1000 rho0`.
pub fn radial_solve(rho0: f64, c: f64) -> Result<RadialSolution> {
    if !(rho0 > 0.0 && c > 0.0) {
        return Err(Error::OracleMismatch(format!(
            "radial oracle needs rho0 > 0 and c > 0 (got {rho0}, {c})"
        )));
    }
    let sol = RadialSolution::closed_form(rho0, c);
    // In s = ln(rho) the ODE is autonomous: du/ds = (u - u^3) / 2.
    let rhs = |_: f64, u: f64| 0.5 * (u - u * u * u);
    let s0 = rho0.ln();
    let s1 = (1000.0 * rho0).ln();
    let checkpoints: Vec<f64> = (0..=60).map(|i| s0 + (s1 - s0) * i as f64 / 60.0).collect();
    let values = dopri5(rhs, s0, c, &checkpoints, 1e-13, 1e-14);
    let mut worst: f64 = 0.0;
    for (s, v) in checkpoints.iter().zip(&values) {
        worst = worst.max((v - sol.u(s.exp())).abs());
    }
    if worst >= 1e-9 {
        return Err(Error::OracleMismatch(format!(
            "closed form and ODE integration differ by {worst:e} for rho0 = {rho0}, c = {c}"
        )));
    }
    Ok(sol)
}

/// Adaptive Dormand-Prince 5(4) for a scalar ODE; returns `y` at each checkpoint.
pub fn dopri5(
    f: impl Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    checkpoints: &[f64],
    rtol: f64,
    atol: f64,
) -> Vec<f64> {
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut t, mut y) = (t0, y0);
    let mut h: f64 = 1e-3;
    for &target in checkpoints {
        while t < target {
            let step = h.min(target - t);
            let k1 = f(t, y);
            let k2 = f(t + C2 * step, y + step * A21 * k1);
            let k3 = f(t + C3 * step, y + step * (A31 * k1 + A32 * k2));
            let k4 = f(t + C4 * step, y + step * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(
                t + C5 * step,
                y + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
            );
            let k6 = f(
                t + step,
                y + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
            );
            let y_new = y + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = f(t + step, y_new);
            let err = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let scale = atol + rtol * y.abs().max(y_new.abs());
            let ratio = err.abs() / scale;
            if ratio <= 1.0 {
                t += step;
                y = y_new;
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = step * factor;
        }
        out.push(y);
    }
    out
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Closed-form area of the spheroid with equatorial radius `a` and polar radius `c`.
pub fn spheroid_area(a: f64, c: f64) -> f64 {
    use std::f64::consts::PI;
    if (a - c).abs() < 1e-15 * a {
        return 4.0 * PI * a * a;
    }
    if c > a {
        let e = (1.0 - a * a / (c * c)).sqrt();
        2.0 * PI * a * a * (1.0 + c / (a * e) * e.asin())
    } else {
        let e = (1.0 - c * c / (a * a)).sqrt();
        2.0 * PI * a * a * (1.0 + (1.0 - e * e) / e * e.atanh())
    }
}

/// Closed-form mean curvature of the spheroid `(a sin t, c cos t)` at angle `t`.
pub fn spheroid_mean_curvature(a: f64, c: f64, t: f64) -> f64 {
    let e = a * a * t.cos().powi(2) + c * c * t.sin().powi(2);
    a * c / e.powf(1.5) + c / (a * e.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConvergenceOrder {
    /// All errors vanish to roundoff; there is no order to measure.
    Exact,
    Order {
        /// Mean of the pairwise orders.
        p: f64,
        pairwise: Vec<f64>,
        errors: Vec<f64>,
    },
}

impl ConvergenceOrder {
    pub fn order(&self) -> Option<f64> {
        match self {
            ConvergenceOrder::Exact => None,
            ConvergenceOrder::Order { p, .. } => Some(*p),
        }
    }
}

/// Richardson order of a refinement study.
///
/// `runs` pairs a grid spacing with the value computed at it, in any order; the
/// finest run is the reference. Errors of the coarser runs are modelled as
/// `C (h^p - h_ref^p)`, so the reference's own error does not bias `p`.
pub fn convergence_order(runs: &[(f64, f64)]) -> Result<ConvergenceOrder> {
    if runs.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} resolutions given, need at least 3",
            runs.len()
        )));
    }
    let mut runs = runs.to_vec();
    runs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (h_ref, v_ref) = *runs.last().unwrap();
    let coarse = &runs[..runs.len() - 1];
    let errors: Vec<f64> = coarse.iter().map(|(_, v)| (v - v_ref).abs()).collect();
    let scale = runs.iter().fold(0.0f64, |a, (_, v)| a.max(v.abs())).max(1e-300);
    if errors.iter().all(|e| *e <= 1e-13 * scale) {
        return Ok(ConvergenceOrder::Exact);
    }
    if errors.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NonMonotoneErrors(errors));
    }
    let mut pairwise = Vec::with_capacity(errors.len() - 1);
    for i in 0..errors.len() - 1 {
        let (h1, h2) = (coarse[i].0, coarse[i + 1].0);
        let target = errors[i] / errors[i + 1];
        let ratio = |p: f64| (h1.powf(p) - h_ref.powf(p)) / (h2.powf(p) - h_ref.powf(p));
        // ratio(p) increases monotonically in p for h1 > h2 > h_ref.
        let (mut lo, mut hi): (f64, f64) = (1e-3, 12.0);
        if ratio(lo) >= target {
            pairwise.push(lo);
            continue;
        }
        if ratio(hi) <= target {
            pairwise.push(hi);
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        pairwise.push(0.5 * (lo + hi));
    }
    let p = pairwise.iter().sum::<f64>() / pairwise.len() as f64;
    Ok(ConvergenceOrder::Order {
        p,
        pairwise,
        errors,
    })
}
