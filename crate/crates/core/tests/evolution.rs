use quasisphere::evolution::{evolve, select_step, step, QuasiSphericalState, Scheme, SolverConfig};
use quasisphere::geometry::{build_surface, frame_at, ConvexSurface, GridField, SurfaceSpec};
use quasisphere::oracle::{dopri5, radial_solve};

fn sphere(n: usize) -> ConvexSurface {
    build_surface(&SurfaceSpec::sphere(1.0, n)).unwrap()
}

fn config(r_max: f64) -> SolverConfig {
    SolverConfig {
        r_max,
        ..SolverConfig::default()
    }
}

#[test]
fn flat_data_stays_flat() {
    for spec in [SurfaceSpec::sphere(1.0, 32), SurfaceSpec::spheroid(1.0, 1.2, 32)] {
        let s = build_surface(&spec).unwrap();
        let mut worst: f64 = 0.0;
        let out = evolve(&s, &GridField::constant(32, 1, 1.0), &config(100.0), |st, _| {
            worst = worst.max(st.u.map(|v| v - 1.0).max_abs());
        })
        .unwrap();
        assert_eq!(worst, 0.0);
        assert_eq!(out.decay_constant, 0.0);
    }
}

#[test]
fn single_step_tracks_radial_ode() {
    let s = sphere(32);
    let state = QuasiSphericalState::initial(GridField::constant(32, 1, 2.0)).unwrap();
    let mut errs = vec![];
    for dr in [1e-2, 5e-3, 2.5e-3] {
        let next = step(&state, &s, dr, &SolverConfig::default()).unwrap();
        assert!(next.u.is_phi_independent());
        let v = next.u.values();
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-14));
        // 2 rho u' = u - u^3 with rho = 1 + r, integrated independently.
        let reference = dopri5(
            |rho, u| (u - u * u * u) / (2.0 * rho),
            1.0,
            2.0,
            &[1.0 + dr],
            1e-14,
            1e-15,
        )[0];
        assert!(v[0] < 2.0);
        errs.push((v[0] - reference).abs());
    }
    // local error O(dr^3)
    assert!(errs[0] / errs[1] > 7.0 && errs[1] / errs[2] > 7.0, "{errs:?}");
}

#[test]
fn schwarzschild_profile_reproduced() {
    let s = sphere(64);
    let sol = radial_solve(1.0, 2.0).unwrap();
    let mut worst: f64 = 0.0;
    let out = evolve(&s, &GridField::constant(64, 1, 2.0), &config(1000.0), |st, _| {
        let v = st.u.values();
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-13));
        worst = worst.max((v[0] / sol.u(1.0 + st.r) - 1.0).abs());
    })
    .unwrap();
    assert!(worst < 1e-4, "relative error {worst:e}");
    assert_eq!(out.state.r, 1000.0);
    // u - 1 ~ m / r
    assert!((out.decay_constant - 0.375).abs() < 2e-3);
}

#[test]
fn ordered_constants_stay_ordered() {
    let s = sphere(32);
    let mut upper = vec![];
    let mut lower = vec![];
    let cfg = config(50.0);
    evolve(&s, &GridField::constant(32, 1, 2.0), &cfg, |st, _| upper.push(st.u.clone())).unwrap();
    evolve(&s, &GridField::constant(32, 1, 1.5), &cfg, |st, _| lower.push(st.u.clone())).unwrap();
    assert_eq!(upper.len(), lower.len());
    for (u, v) in upper.iter().zip(&lower).skip(1) {
        assert!(u.zip_with(v, |a, b| a - b).min() > 0.0);
    }
}

#[test]
fn perturbed_data_dominates_its_minimum() {
    let s = sphere(48);
    let u0 = GridField::axisymmetric(&s, |t| 1.0 + 0.1 * t.cos());
    let v0 = GridField::constant(48, 1, u0.min());
    let cfg = config(20.0);
    let mut us = vec![];
    let mut vs = vec![];
    evolve(&s, &u0, &cfg, |st, _| us.push(st.u.clone())).unwrap();
    evolve(&s, &v0, &cfg, |st, _| vs.push(st.u.clone())).unwrap();
    for (u, v) in us.iter().zip(&vs) {
        assert!(u.zip_with(v, |a, b| a - b).min() >= -1e-12);
    }
}

#[test]
fn deviation_shrinks_with_initial_perturbation() {
    let s = build_surface(&SurfaceSpec::spheroid(1.0, 1.2, 32)).unwrap();
    let base = GridField::axisymmetric(&s, |t| 1.0 + 0.2 * t.cos().powi(2));
    let cfg = config(5.0);
    let run = |u0: &GridField| {
        let mut states = vec![];
        evolve(&s, u0, &cfg, |st, _| states.push(st.u.clone())).unwrap();
        states
    };
    let reference = run(&base);
    let mut sups = vec![];
    for delta in [0.1, 0.05, 0.025] {
        let perturbed = base.zip_with(&GridField::axisymmetric(&s, |t| t.sin()), |b, p| b + delta * p);
        let states = run(&perturbed);
        let sup = states
            .iter()
            .zip(&reference)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        assert!(sup <= delta * (1.0 + 1e-12));
        sups.push(sup);
    }
    assert!(sups[0] / sups[1] >= 1.9 && sups[1] / sups[2] >= 1.9, "{sups:?}");
}

#[test]
fn axisymmetric_fast_path_matches_full_grid() {
    let s = build_surface(&SurfaceSpec::spheroid(1.0, 1.2, 24).with_n_phi(8)).unwrap();
    let full = GridField::from_fn(&s, |t, _| 1.0 + 0.3 * t.cos().powi(2));
    let reduced = full.to_axisymmetric().unwrap();
    let cfg = SolverConfig::default();
    let mut a = QuasiSphericalState::initial(full).unwrap();
    let mut b = QuasiSphericalState::initial(reduced).unwrap();
    for _ in 0..50 {
        let dr = select_step(&b, &frame_at(&s, b.r), &cfg).unwrap();
        a = step(&a, &s, dr, &cfg).unwrap();
        b = step(&b, &s, dr, &cfg).unwrap();
    }
    assert!(a.u.max_abs_diff(&b.u.expand(8)) < 1e-14);
}

#[test]
fn implicit_azimuthal_scheme_agrees_with_explicit() {
    let s = build_surface(&SurfaceSpec::sphere(1.0, 24).with_n_phi(16)).unwrap();
    let u0 = GridField::from_fn(&s, |t, p| 1.0 + 0.1 * t.sin() * p.cos());
    let explicit = SolverConfig {
        r_max: 0.5,
        ..SolverConfig::default()
    };
    let imex = SolverConfig {
        scheme: Scheme::ThetaExplicitPhiImplicit,
        ..explicit
    };
    let a = evolve(&s, &u0, &explicit, |_, _| {}).unwrap();
    let b = evolve(&s, &u0, &imex, |_, _| {}).unwrap();
    assert!(b.steps < a.steps);
    assert!(a.state.u.max_abs_diff(&b.state.u) < 2e-3);
}

#[test]
fn decay_is_inverse_linear() {
    let s = build_surface(&SurfaceSpec::spheroid(1.0, 1.2, 32)).unwrap();
    let u0 = GridField::axisymmetric(&s, |t| 1.0 + 0.3 * t.cos().powi(2));
    let mut scaled = vec![];
    evolve(&s, &u0, &config(1000.0), |st, _| {
        if st.r >= 10.0 {
            scaled.push(st.r * st.u.map(|v| v - 1.0).max_abs());
        }
    })
    .unwrap();
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi < 2.0 * lo, "r |u - 1| ranges over [{lo}, {hi}]");
}
