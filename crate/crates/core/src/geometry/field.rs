use serde::{Deserialize, Serialize};

use super::ConvexSurface;
use crate::error::{Error, Result};

/// A scalar field on the `(theta, phi)` grid, stored ring by ring.
///
/// `n_phi == 1` is the axisymmetric representation: one value per parallel,
/// standing for a field that is constant along each ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    n_theta: usize,
    n_phi: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(n_theta: usize, n_phi: usize, values: Vec<f64>) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 || values.len() != n_theta * n_phi {
            return Err(Error::ShapeMismatch {
                got_theta: values.len() / n_phi.max(1),
                got_phi: n_phi,
                want_theta: n_theta,
                want_phi: n_phi,
            });
        }
        Ok(GridField {
            n_theta,
            n_phi,
            values,
        })
    }

    pub fn constant(n_theta: usize, n_phi: usize, value: f64) -> Self {
        GridField {
            n_theta,
            n_phi,
            values: vec![value; n_theta * n_phi],
        }
    }

    /// Samples `f(theta, phi)` on the full grid of `surface`.
    pub fn from_fn(surface: &ConvexSurface, f: impl Fn(f64, f64) -> f64) -> Self {
        let (nt, np) = (surface.n_theta(), surface.n_phi());
        let mut values = Vec::with_capacity(nt * np);
        for j in 0..nt {
            let t = surface.theta(j);
            for k in 0..np {
                values.push(f(t, surface.phi(k)));
            }
        }
        GridField {
            n_theta: nt,
            n_phi: np,
            values,
        }
    }

    /// Samples `f(theta)` once per parallel.
    pub fn axisymmetric(surface: &ConvexSurface, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..surface.n_theta()).map(|j| f(surface.theta(j))).collect();
        GridField {
            n_theta: surface.n_theta(),
            n_phi: 1,
            values,
        }
    }

    /// One value per parallel, e.g. a per-ring geometric quantity.
    pub fn from_rings(values: Vec<f64>) -> Self {
        GridField {
            n_theta: values.len(),
            n_phi: 1,
            values,
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ring(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_phi..(j + 1) * self.n_phi]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_phi + k % self.n_phi]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// True when every ring holds a single repeated value.
    pub fn is_phi_independent(&self) -> bool {
        self.values
            .chunks(self.n_phi)
            .all(|ring| ring.iter().all(|v| *v == ring[0]))
    }

    /// Collapses a phi-independent field to one value per ring.
    pub fn to_axisymmetric(&self) -> Option<GridField> {
        if !self.is_phi_independent() {
            return None;
        }
        let values = self.values.chunks(self.n_phi).map(|r| r[0]).collect();
        Some(GridField {
            n_theta: self.n_theta,
            n_phi: 1,
            values,
        })
    }

    /// Replicates an axisymmetric field around each ring.
    pub fn expand(&self, n_phi: usize) -> GridField {
        if self.n_phi == n_phi {
            return self.clone();
        }
        assert_eq!(self.n_phi, 1, "only axisymmetric fields can be expanded");
        let values = self
            .values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, n_phi))
            .collect();
        GridField {
            n_theta: self.n_theta,
            n_phi,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Combines two fields nodewise, broadcasting an axisymmetric operand.
    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> GridField {
        assert_eq!(self.n_theta, other.n_theta, "theta resolution mismatch");
        let n_phi = self.n_phi.max(other.n_phi);
        assert!(
            (self.n_phi == n_phi || self.n_phi == 1) && (other.n_phi == n_phi || other.n_phi == 1),
            "phi resolution mismatch"
        );
        let mut values = Vec::with_capacity(self.n_theta * n_phi);
        for j in 0..self.n_theta {
            for k in 0..n_phi {
                values.push(f(self.get(j, k), other.get(j, k)));
            }
        }
        GridField {
            n_theta: self.n_theta,
            n_phi,
            values,
        }
    }

    pub fn scale(&self, c: f64) -> GridField {
        self.map(|v| c * v)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.zip_with(other, |a, b| a - b).max_abs()
    }

    /// Index of the first value that is not strictly positive and finite.
    pub fn first_non_positive(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
            .map(|(i, v)| (i, *v))
    }
}
