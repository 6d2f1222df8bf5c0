//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and expression strings and returns a JSON
//! string; errors come back as rejected calls with the library's message.

use quasisphere::bartnik::{mu0_bounds, solve_mu0, BartnikData, Mu0Options};
use quasisphere::evolution::SolverConfig;
use quasisphere::expr::HExpression;
use quasisphere::geometry::{build_surface, ConvexSurface, SurfaceSpec};
use quasisphere::mass::{run_mass, ADM_NORMALIZATION};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn surface(polar_radius: f64, n_theta: usize) -> Result<ConvexSurface, String> {
    let spec = if (polar_radius - 1.0).abs() < 1e-15 {
        SurfaceSpec::sphere(1.0, n_theta)
    } else {
        SurfaceSpec::spheroid(1.0, polar_radius, n_theta)
    };
    build_surface(&spec.with_n_phi(8)).map_err(|e| e.to_string())
}

fn solver(r_max: f64) -> SolverConfig {
    SolverConfig {
        r_max,
        ..SolverConfig::default()
    }
}

#[derive(Serialize)]
struct Curve {
    r: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    mass: f64,
    bracket: (f64, f64),
    /// `u(theta)` on the meridian `phi = 0` at a few radii.
    theta: Vec<f64>,
    profiles: Vec<(f64, Vec<f64>)>,
}

/// Evolves `u0` on the spheroid with equatorial radius 1 and the given polar radius.
pub fn extension(polar_radius: f64, u0: &str, n_theta: usize, r_max: f64) -> Result<String, String> {
    let s = surface(polar_radius, n_theta)?;
    let u0 = HExpression::parse(u0)
        .and_then(|e| e.evaluate_on(&s))
        .map_err(|e| e.to_string())?;
    let run = run_mass(&s, &u0, &solver(r_max), true).map_err(|e| e.to_string())?;
    let fit = run.fit().map_err(|e| e.to_string())?;
    let samples = &run.series.samples;
    let mut profiles = Vec::new();
    let mut next = 0.0;
    for st in &run.states {
        if st.r >= next || st.r == r_max {
            profiles.push((st.r, (0..n_theta).map(|j| st.u.get(j, 0)).collect()));
            next = if st.r == 0.0 { 0.5 } else { st.r * 10.0 };
        }
    }
    let curve = Curve {
        r: samples.iter().map(|m| m.r).collect(),
        upper: samples.iter().map(|m| m.upper / ADM_NORMALIZATION).collect(),
        lower: samples.iter().map(|m| m.lower / ADM_NORMALIZATION).collect(),
        mass: fit.value,
        bracket: fit.bracket(),
        theta: (0..n_theta).map(|j| s.theta(j)).collect(),
        profiles,
    };
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Mu0Summary {
    mu0: f64,
    bracket: (f64, f64),
    analytic_lower: f64,
    analytic_upper: f64,
    is_euclidean_case: bool,
}

/// The critical scaling `mu0` of the mean curvature `h`.
pub fn critical_scaling(polar_radius: f64, h: &str, n_theta: usize) -> Result<String, String> {
    let s = surface(polar_radius, n_theta)?;
    let h = HExpression::parse(h)
        .and_then(|e| e.evaluate_on(&s))
        .map_err(|e| e.to_string())?;
    let data = BartnikData::new(s, h).map_err(|e| e.to_string())?;
    let r = solve_mu0(&data, &SolverConfig::default(), &Mu0Options::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&Mu0Summary {
        mu0: r.mu0,
        bracket: r.bracket,
        analytic_lower: r.analytic_lower,
        analytic_upper: r.analytic_upper,
        is_euclidean_case: r.is_euclidean_case,
    })
    .map_err(|e| e.to_string())
}

/// Just the bounds, cheap enough to update while typing.
pub fn bounds(polar_radius: f64, h: &str, n_theta: usize) -> Result<String, String> {
    let s = surface(polar_radius, n_theta)?;
    let h = HExpression::parse(h)
        .and_then(|e| e.evaluate_on(&s))
        .map_err(|e| e.to_string())?;
    let data = BartnikData::new(s, h).map_err(|e| e.to_string())?;
    serde_json::to_string(&mu0_bounds(&data)).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = extension)]
pub fn extension_js(polar_radius: f64, u0: &str, n_theta: usize, r_max: f64) -> Result<String, JsValue> {
    extension(polar_radius, u0, n_theta, r_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = criticalScaling)]
pub fn critical_scaling_js(polar_radius: f64, h: &str, n_theta: usize) -> Result<String, JsValue> {
    critical_scaling(polar_radius, h, n_theta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = bounds)]
pub fn bounds_js(polar_radius: f64, h: &str, n_theta: usize) -> Result<String, JsValue> {
    bounds(polar_radius, h, n_theta).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schwarzschild_curve() {
        let v: serde_json::Value = serde_json::from_str(&extension(1.0, "2", 32, 1000.0).unwrap()).unwrap();
        assert!((v["mass"].as_f64().unwrap() - 0.375).abs() < 2e-3);
        let r = v["r"].as_array().unwrap();
        assert_eq!(r.len(), v["upper"].as_array().unwrap().len());
        assert_eq!(v["profiles"][0][0], 0.0);
        assert_eq!(v["theta"].as_array().unwrap().len(), 32);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(extension(1.0, "cos(theta)", 16, 10.0).is_err());
        assert!(bounds(1.0, "2*(", 16).is_err());
        assert!(extension(-1.0, "1", 16, 10.0).is_err());
    }

    #[test]
    fn bounds_and_mu0() {
        let b: (f64, f64) = serde_json::from_str(&bounds(1.2, "2", 32).unwrap()).unwrap();
        assert!(b.0 <= b.1);
        let v: serde_json::Value = serde_json::from_str(&critical_scaling(1.0, "4", 16).unwrap()).unwrap();
        assert!((v["mu0"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    }
}
