use std::f64::consts::PI;

use super::{ConvexSurface, GridField};

/// Geometry of the parallel surface at Euclidean distance `r` from the base.
///
/// All per-node quantities are stored once per parallel since the surface is
/// rotationally symmetric. `h0`, `scalar` and `density` are averages over the
/// cell around each node, taken from the exact cell area `w(r)` of the leaf:
/// `density = w / d_theta`, `h0 = w' / w`, `scalar = w'' / w`. With these the
/// discrete mass functionals obey the same identities as the continuous ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FoliationFrame {
    pub r: f64,
    pub d_theta: f64,
    /// Meridian metric coefficient of the leaf.
    pub e: Vec<f64>,
    /// Parallel metric coefficient of the leaf.
    pub g: Vec<f64>,
    /// Cell-averaged mean curvature of the leaf in Euclidean space.
    pub h0: Vec<f64>,
    /// Mean curvature of the leaf at the node itself.
    pub h0_node: Vec<f64>,
    /// Cell-averaged scalar curvature of the leaf (twice its Gaussian curvature).
    pub scalar: Vec<f64>,
    /// Cell-averaged area density.
    pub density: Vec<f64>,
    /// `1 / h0`.
    pub inv_h0: Vec<f64>,
    /// `1 / density`.
    pub inv_density: Vec<f64>,
    /// Meridional flux coefficient `sqrt(g / e)` on the `n_theta + 1` faces,
    /// zero on the two pole faces.
    pub flux: Vec<f64>,
}

pub fn frame_at(surface: &ConvexSurface, r: f64) -> FoliationFrame {
    let mut frame = FoliationFrame {
        r,
        d_theta: surface.d_theta(),
        e: Vec::new(),
        g: Vec::new(),
        h0: Vec::new(),
        h0_node: Vec::new(),
        scalar: Vec::new(),
        density: Vec::new(),
        inv_h0: Vec::new(),
        inv_density: Vec::new(),
        flux: Vec::new(),
    };
    frame.update(surface, r);
    frame
}

impl FoliationFrame {
    /// Recomputes the frame in place for distance `r`, reusing its buffers.
    pub fn update(&mut self, surface: &ConvexSurface, r: f64) {
        debug_assert!(r >= 0.0);
        let n = surface.n_theta();
        self.r = r;
        self.d_theta = surface.d_theta();
        for v in [
            &mut self.e,
            &mut self.g,
            &mut self.h0,
            &mut self.h0_node,
            &mut self.scalar,
            &mut self.density,
            &mut self.inv_h0,
            &mut self.inv_density,
            &mut self.flux,
        ] {
            v.clear();
            v.reserve(n + 1);
        }
        let inv_dt = 1.0 / self.d_theta;
        for (ring, m) in surface.nodes().iter().zip(surface.cell_moments()) {
            let s1 = 1.0 + r * ring.k1;
            let s2 = 1.0 + r * ring.k2;
            self.e.push(ring.e0 * s1 * s1);
            self.g.push(ring.g0 * s2 * s2);
            self.h0_node.push(ring.k1 / s1 + ring.k2 / s2);
            let w = m[0] + r * (m[1] + r * m[2]);
            let inv_w = 1.0 / w;
            let h0 = (m[1] + 2.0 * r * m[2]) * inv_w;
            self.h0.push(h0);
            self.inv_h0.push(1.0 / h0);
            self.scalar.push(2.0 * m[2] * inv_w);
            self.density.push(w * inv_dt);
            self.inv_density.push(inv_w * self.d_theta);
        }
        self.flux.push(0.0);
        for (face, f0) in surface.faces().iter().zip(surface.face_flux()) {
            let s1 = 1.0 + r * face.k1;
            let s2 = 1.0 + r * face.k2;
            self.flux.push(f0 * s2 / s1);
        }
        self.flux.push(0.0);
    }

    pub fn n_theta(&self) -> usize {
        self.e.len()
    }

    /// Per-node quadrature weight for a field with `n_phi` columns.
    pub fn weight(&self, j: usize, n_phi: usize) -> f64 {
        self.density[j] * self.d_theta * (2.0 * PI / n_phi as f64)
    }

    pub fn area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.d_theta * 2.0 * PI
    }

    /// Nodal mean curvature.
    pub fn mean_curvature_field(&self) -> GridField {
        GridField::from_rings(self.h0_node.clone())
    }

    pub fn scalar_curvature_field(&self) -> GridField {
        GridField::from_rings(self.scalar.clone())
    }
}

/// Integral of `field` over the leaf, each node weighted by its exact cell area.
pub fn integrate(frame: &FoliationFrame, field: &GridField) -> f64 {
    assert_eq!(field.n_theta(), frame.n_theta(), "theta resolution mismatch");
    let np = field.n_phi();
    (0..frame.n_theta())
        .map(|j| frame.weight(j, np) * field.ring(j).iter().sum::<f64>())
        .sum()
}

/// Meridional part of the Laplace-Beltrami operator.
pub fn laplacian_theta(frame: &FoliationFrame, field: &GridField, out: &mut [f64]) {
    let (nt, np) = (field.n_theta(), field.n_phi());
    debug_assert_eq!(nt, frame.n_theta());
    let v = field.values();
    let inv_h2 = 1.0 / (frame.d_theta * frame.d_theta);
    for j in 0..nt {
        let c = inv_h2 * frame.inv_density[j];
        let (fs, fn_) = (frame.flux[j + 1], frame.flux[j]);
        for k in 0..np {
            let i = j * np + k;
            let mut acc = 0.0;
            if j + 1 < nt {
                acc += fs * (v[i + np] - v[i]);
            }
            if j > 0 {
                acc -= fn_ * (v[i] - v[i - np]);
            }
            out[i] = c * acc;
        }
    }
}

/// Azimuthal part of the Laplace-Beltrami operator, added into `out`.
pub fn add_laplacian_phi(frame: &FoliationFrame, field: &GridField, out: &mut [f64]) {
    let (nt, np) = (field.n_theta(), field.n_phi());
    if np == 1 {
        return;
    }
    let v = field.values();
    let dphi = 2.0 * PI / np as f64;
    let inv = 1.0 / (dphi * dphi);
    for j in 0..nt {
        let c = inv / frame.g[j];
        let ring = &v[j * np..(j + 1) * np];
        for k in 0..np {
            let prev = ring[(k + np - 1) % np];
            let next = ring[(k + 1) % np];
            out[j * np + k] += c * (next - 2.0 * ring[k] + prev);
        }
    }
}

/// Second-order divergence-form Laplace-Beltrami operator of the leaf metric.
pub fn laplacian(frame: &FoliationFrame, field: &GridField) -> GridField {
    let mut out = vec![0.0; field.len()];
    laplacian_theta(frame, field, &mut out);
    add_laplacian_phi(frame, field, &mut out);
    GridField::new(field.n_theta(), field.n_phi(), out).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, SurfaceSpec};

    fn unit_sphere(n: usize) -> ConvexSurface {
        build_surface(&SurfaceSpec::sphere(1.0, n).with_n_phi(2 * n)).unwrap()
    }

    #[test]
    fn concentric_spheres() {
        let s = unit_sphere(32);
        let f0 = frame_at(&s, 0.0);
        for j in 0..32 {
            assert_eq!(f0.e[j], s.nodes()[j].e0);
            assert_eq!(f0.g[j], s.nodes()[j].g0);
            assert_eq!(f0.h0_node[j], 2.0);
            assert!((f0.h0[j] - 2.0).abs() < 1e-14);
            assert!((f0.scalar[j] - 2.0).abs() < 1e-14);
        }
        let f1 = frame_at(&s, 1.0);
        for j in 0..32 {
            assert_eq!(f1.h0_node[j], 1.0);
            assert!((f1.h0[j] - 1.0).abs() < 1e-14);
            assert!((f1.scalar[j] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn area_grows_with_r() {
        let s = build_surface(&SurfaceSpec::spheroid(1.0, 1.2, 32)).unwrap();
        let mut last = 0.0;
        for r in [0.0, 0.1, 1.0, 10.0, 100.0] {
            let a = frame_at(&s, r).area();
            assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn integrate_basics() {
        let s = unit_sphere(128);
        let f = frame_at(&s, 0.0);
        let one = GridField::constant(128, 1, 1.0);
        assert!((integrate(&f, &one) / (4.0 * PI) - 1.0).abs() < 1e-14);
        assert_eq!(integrate(&f, &GridField::constant(128, 7, 0.0)), 0.0);
        let odd = GridField::axisymmetric(&s, f64::cos);
        assert!(integrate(&f, &odd).abs() < 1e-12);
    }

    #[test]
    fn constants_are_harmonic() {
        let s = build_surface(&SurfaceSpec::spheroid(1.0, 1.2, 40).with_n_phi(12)).unwrap();
        let f = frame_at(&s, 0.7);
        let c = GridField::constant(40, 12, 3.25);
        assert!(laplacian(&f, &c).values().iter().all(|v| *v == 0.0));
    }
}
