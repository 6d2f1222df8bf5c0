//! Strictly convex surfaces of revolution.
//!
//! The meridian is parametrized by the polar angle `theta in [0, pi]`, running
//! from the north pole (`theta = 0`) to the south pole, as `(x(theta), z(theta))`
//! with `x` the distance to the symmetry axis. The normal points outward and
//! principal curvatures of a convex surface are positive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature;
use crate::error::{Error, Result};

/// Minimum number of profile samples per grid cell for sampled meridians.
pub const PROFILE_OVERSAMPLING: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceKind {
    Sphere {
        radius: f64,
    },
    Spheroid {
        equatorial_radius: f64,
        polar_radius: f64,
    },
    /// Meridian sampled at increasing angles from 0 to pi.
    Profile {
        theta: Vec<f64>,
        x: Vec<f64>,
        z: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            n_theta: 64,
            n_phi: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    #[serde(default)]
    pub resolution: Resolution,
}

impl SurfaceSpec {
    pub fn sphere(radius: f64, n_theta: usize) -> Self {
        SurfaceSpec {
            kind: SurfaceKind::Sphere { radius },
            resolution: Resolution { n_theta, n_phi: 16 },
        }
    }

    pub fn spheroid(equatorial_radius: f64, polar_radius: f64, n_theta: usize) -> Self {
        SurfaceSpec {
            kind: SurfaceKind::Spheroid {
                equatorial_radius,
                polar_radius,
            },
            resolution: Resolution { n_theta, n_phi: 16 },
        }
    }

    pub fn with_n_phi(mut self, n_phi: usize) -> Self {
        self.resolution.n_phi = n_phi;
        self
    }
}

/// Geometry of the base surface on one parallel (or at one cell face).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    pub theta: f64,
    /// Meridian metric coefficient `x'^2 + z'^2`.
    pub e0: f64,
    /// Parallel metric coefficient `x^2`.
    pub g0: f64,
    /// Meridian principal curvature.
    pub k1: f64,
    /// Parallel principal curvature.
    pub k2: f64,
}

impl RingGeometry {
    pub fn mean_curvature(&self) -> f64 {
        self.k1 + self.k2
    }
}

/// Position and first two derivatives of the meridian at one angle.
#[derive(Debug, Clone, Copy)]
struct MeridianPoint {
    x: f64,
    dx: f64,
    ddx: f64,
    z: f64,
    dz: f64,
    ddz: f64,
}

impl MeridianPoint {
    fn ring(&self, theta: f64) -> RingGeometry {
        let e0 = self.dx * self.dx + self.dz * self.dz;
        let speed = e0.sqrt();
        RingGeometry {
            theta,
            e0,
            g0: self.x * self.x,
            k1: (self.dz * self.ddx - self.dx * self.ddz) / (e0 * speed),
            k2: -self.dz / (self.x * speed),
        }
    }
}

enum Meridian {
    Sphere(f64),
    Spheroid { a: f64, c: f64 },
    Sampled(SampledProfile),
}

impl Meridian {
    fn ring(&self, theta: f64) -> RingGeometry {
        match self {
            Meridian::Sphere(r) => {
                let s = theta.sin();
                RingGeometry {
                    theta,
                    e0: r * r,
                    g0: r * r * s * s,
                    k1: 1.0 / r,
                    k2: 1.0 / r,
                }
            }
            Meridian::Spheroid { a, c } => {
                let (s, co) = theta.sin_cos();
                let e0 = a * a * co * co + c * c * s * s;
                RingGeometry {
                    theta,
                    e0,
                    g0: a * a * s * s,
                    k1: a * c / (e0 * e0.sqrt()),
                    k2: c / (a * e0.sqrt()),
                }
            }
            Meridian::Sampled(p) => p.point(theta).ring(theta),
        }
    }

    /// Integrals of `dA`, `(k1 + k2) dA` and `k1 k2 dA` over `[a, b]`, per unit
    /// azimuthal angle.
    fn cell_moments(&self, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> [f64; 3] {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut m = [0.0; 3];
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let ring = self.ring(mid + half * x);
            let d = half * w * (ring.e0 * ring.g0).sqrt();
            m[0] += d;
            m[1] += d * (ring.k1 + ring.k2);
            m[2] += d * ring.k1 * ring.k2;
        }
        m
    }
}

/// Meridian samples with centered-difference derivatives, linearly interpolated.
struct SampledProfile {
    theta: Vec<f64>,
    pts: Vec<MeridianPoint>,
}

impl SampledProfile {
    fn new(theta: &[f64], x: &[f64], z: &[f64], n_theta: usize) -> Result<Self> {
        let m = theta.len();
        if x.len() != m || z.len() != m {
            return Err(Error::DegenerateProfile(format!(
                "theta, x, z lengths differ ({m}, {}, {})",
                x.len(),
                z.len()
            )));
        }
        if m < PROFILE_OVERSAMPLING * n_theta + 1 {
            return Err(Error::DegenerateProfile(format!(
                "{m} samples is too coarse for n_theta = {n_theta} (need at least {})",
                PROFILE_OVERSAMPLING * n_theta + 1
            )));
        }
        if theta[0].abs() > 1e-12 || (theta[m - 1] - PI).abs() > 1e-12 {
            return Err(Error::DegenerateProfile(
                "theta samples must start at 0 and end at pi".into(),
            ));
        }
        if theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateProfile(
                "theta samples must be strictly increasing".into(),
            ));
        }
        if x.iter().chain(z).chain(theta).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateProfile("non-finite sample".into()));
        }
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if x[0].abs() > 1e-9 * scale || x[m - 1].abs() > 1e-9 * scale {
            return Err(Error::DegenerateProfile(
                "profile must meet the axis (x = 0) at both poles".into(),
            ));
        }
        if let Some(k) = (1..m - 1).find(|&k| x[k] <= 0.0) {
            return Err(Error::DegenerateProfile(format!(
                "x = {} <= 0 at interior sample theta = {}",
                x[k], theta[k]
            )));
        }
        // z must leave the north pole downward and reach the south pole from above.
        if z[1] >= z[0] || z[m - 2] <= z[m - 1] {
            return Err(Error::DegenerateProfile(
                "z is not monotone near the poles".into(),
            ));
        }

        // Reflection across the axis: x is odd and z even about each pole.
        let neighbor = |k: isize| -> (f64, f64, f64) {
            if k < 0 {
                let j = (-k) as usize;
                (-theta[j], -x[j], z[j])
            } else if k as usize >= m {
                let j = 2 * (m - 1) - k as usize;
                (2.0 * PI - theta[j], -x[j], z[j])
            } else {
                let j = k as usize;
                (theta[j], x[j], z[j])
            }
        };
        let pts = (0..m as isize)
            .map(|k| {
                let (tm, xm, zm) = neighbor(k - 1);
                let (t0, x0, z0) = neighbor(k);
                let (tp, xp, zp) = neighbor(k + 1);
                let (dx, ddx) = centered(tm, t0, tp, xm, x0, xp);
                let (dz, ddz) = centered(tm, t0, tp, zm, z0, zp);
                MeridianPoint {
                    x: x0,
                    dx,
                    ddx,
                    z: z0,
                    dz,
                    ddz,
                }
            })
            .collect();
        Ok(SampledProfile {
            theta: theta.to_vec(),
            pts,
        })
    }

    fn point(&self, t: f64) -> MeridianPoint {
        let i = self
            .theta
            .partition_point(|&s| s <= t)
            .clamp(1, self.theta.len() - 1);
        let (t0, t1) = (self.theta[i - 1], self.theta[i]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (&self.pts[i - 1], &self.pts[i]);
        let lerp = |p: f64, q: f64| p + w * (q - p);
        MeridianPoint {
            x: lerp(a.x, b.x),
            dx: lerp(a.dx, b.dx),
            ddx: lerp(a.ddx, b.ddx),
            z: lerp(a.z, b.z),
            dz: lerp(a.dz, b.dz),
            ddz: lerp(a.ddz, b.ddz),
        }
    }
}

/// First and second derivative at `t0` from three (possibly non-uniform) samples.
fn centered(tm: f64, t0: f64, tp: f64, fm: f64, f0: f64, fp: f64) -> (f64, f64) {
    let h1 = t0 - tm;
    let h2 = tp - t0;
    let d1 = -h2 / (h1 * (h1 + h2)) * fm + (h2 - h1) / (h1 * h2) * f0 + h1 / (h2 * (h1 + h2)) * fp;
    let d2 = 2.0 * (fm / (h1 * (h1 + h2)) - f0 / (h1 * h2) + fp / (h2 * (h1 + h2)));
    (d1, d2)
}

/// A discretized strictly convex surface of revolution.
///
/// Nodes are cell-centered, `theta_j = (j + 1/2) pi / n_theta`, so no node
/// sits on a pole. Interior cell faces sit at `theta = j pi / n_theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSurface {
    n_theta: usize,
    n_phi: usize,
    nodes: Vec<RingGeometry>,
    /// Interior faces `j = 1 .. n_theta - 1`.
    faces: Vec<RingGeometry>,
    /// Per cell, the integrals of `dA`, `H0 dA` and `K dA` over the cell per
    /// unit azimuthal angle. The leaf at distance `r` then has cell area
    /// `m0 + r m1 + r^2 m2` exactly.
    cell_moments: Vec<[f64; 3]>,
    /// `sqrt(g0 / e0)` per interior face.
    face_flux: Vec<f64>,
    area: f64,
}

impl ConvexSurface {
    pub(crate) fn cell_moments(&self) -> &[[f64; 3]] {
        &self.cell_moments
    }

    pub(crate) fn face_flux(&self) -> &[f64] {
        &self.face_flux
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn d_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn d_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn nodes(&self) -> &[RingGeometry] {
        &self.nodes
    }

    pub fn faces(&self) -> &[RingGeometry] {
        &self.faces
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.nodes[j].theta
    }

    pub fn phi(&self, k: usize) -> f64 {
        k as f64 * self.d_phi()
    }

    /// Total area, integrated with a high-order rule along the meridian.
    pub fn area(&self) -> f64 {
        self.area
    }
}

pub fn build_surface(spec: &SurfaceSpec) -> Result<ConvexSurface> {
    let Resolution { n_theta, n_phi } = spec.resolution;
    if n_theta < 16 {
        return Err(Error::InvalidSurface(format!(
            "n_theta = {n_theta} is below the minimum of 16"
        )));
    }
    if n_phi < 8 {
        return Err(Error::InvalidSurface(format!(
            "n_phi = {n_phi} is below the minimum of 8"
        )));
    }
    let positive = |name: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidSurface(format!("{name} must be positive, got {v}")))
        }
    };
    let meridian = match &spec.kind {
        SurfaceKind::Sphere { radius } => {
            positive("radius", *radius)?;
            Meridian::Sphere(*radius)
        }
        SurfaceKind::Spheroid {
            equatorial_radius,
            polar_radius,
        } => {
            positive("equatorial_radius", *equatorial_radius)?;
            positive("polar_radius", *polar_radius)?;
            Meridian::Spheroid {
                a: *equatorial_radius,
                c: *polar_radius,
            }
        }
        SurfaceKind::Profile { theta, x, z } => {
            Meridian::Sampled(SampledProfile::new(theta, x, z, n_theta)?)
        }
    };

    let h = PI / n_theta as f64;
    let nodes: Vec<_> = (0..n_theta)
        .map(|j| meridian.ring((j as f64 + 0.5) * h))
        .collect();
    let faces: Vec<_> = (1..n_theta).map(|j| meridian.ring(j as f64 * h)).collect();
    for ring in nodes.iter().chain(&faces) {
        if !(ring.g0 > 0.0) || !(ring.e0 > 0.0) {
            return Err(Error::DegenerateProfile(format!(
                "degenerate metric at theta = {}",
                ring.theta
            )));
        }
        if !(ring.k1 > 0.0) {
            return Err(Error::NonConvex {
                which: 1,
                theta: ring.theta,
                value: ring.k1,
            });
        }
        if !(ring.k2 > 0.0) {
            return Err(Error::NonConvex {
                which: 2,
                theta: ring.theta,
                value: ring.k2,
            });
        }
    }
    let rule = quadrature::gauss_legendre(8);
    let cell_moments: Vec<[f64; 3]> = (0..n_theta)
        .map(|j| meridian.cell_moments(j as f64 * h, (j + 1) as f64 * h, &rule))
        .collect();
    let area = 2.0 * PI * cell_moments.iter().map(|m| m[0]).sum::<f64>();
    let face_flux = faces.iter().map(|f| (f.g0 / f.e0).sqrt()).collect();
    Ok(ConvexSurface {
        n_theta,
        n_phi,
        nodes,
        faces,
        cell_moments,
        face_flux,
        area,
    })
}
