use nalgebra::DVector;
use serde::Serialize;

use super::WeakKamError;

pub const MIN_RESOLUTION: usize = 16;

/// Values on the uniform periodic grid `{k/M}ⁿ`. For `n = 2` node
/// `k = i₁·M + i₂` sits at `(i₁/M, i₂/M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    n: usize,
    resolution: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(n: usize, resolution: usize, values: Vec<f64>) -> Result<Self, WeakKamError> {
        if !(1..=2).contains(&n) {
            return Err(WeakKamError::InvalidArgument(format!("grid dimension {n} not in {{1, 2}}")));
        }
        if resolution < MIN_RESOLUTION {
            return Err(WeakKamError::InvalidArgument(format!("resolution {resolution} below {MIN_RESOLUTION}")));
        }
        if values.len() != resolution.pow(n as u32) {
            return Err(WeakKamError::ResolutionMismatch { kernel: values.len(), grid: resolution.pow(n as u32) });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WeakKamError::InvalidArgument("grid values must be finite".into()));
        }
        Ok(Self { n, resolution, values })
    }

    pub fn constant(n: usize, resolution: usize, a: f64) -> Result<Self, WeakKamError> {
        Self::new(n, resolution, vec![a; resolution.pow(n as u32)])
    }

    pub fn from_fn(n: usize, resolution: usize, f: impl Fn(&DVector<f64>) -> f64) -> Result<Self, WeakKamError> {
        let values = (0..resolution.pow(n as u32)).map(|k| f(&node_coords(n, resolution, k))).collect();
        Self::new(n, resolution, values)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, k: usize) -> DVector<f64> {
        node_coords(self.n, self.resolution, k)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn shifted(&self, a: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + a).collect(), ..self.clone() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(), ..self.clone() }
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Index of the node `delta` steps from `k` along `axis`, wrapping around.
    pub fn neighbor(&self, k: usize, axis: usize, delta: isize) -> usize {
        let m = self.resolution as isize;
        let stride = if self.n == 2 && axis == 0 { self.resolution } else { 1 };
        let coord = if self.n == 2 && axis == 0 { k / self.resolution } else { k % self.resolution } as isize;
        let moved = (coord + delta).rem_euclid(m);
        (k as isize + (moved - coord) * stride as isize) as usize
    }

    /// Central-difference gradient at node `k`.
    pub fn central_gradient(&self, k: usize) -> DVector<f64> {
        let h = self.spacing();
        DVector::from_fn(self.n, |a, _| {
            (self.values[self.neighbor(k, a, 1)] - self.values[self.neighbor(k, a, -1)]) / (2.0 * h)
        })
    }

    /// Central-difference gradient, or `None` when a second-order one-sided
    /// difference disagrees with it by more than `tol` along some axis.
    pub fn smooth_gradient(&self, k: usize, tol: f64) -> Option<DVector<f64>> {
        let h = self.spacing();
        let v = |a: usize, d: isize| self.values[self.neighbor(k, a, d)];
        let mut g = DVector::zeros(self.n);
        for a in 0..self.n {
            let central = (v(a, 1) - v(a, -1)) / (2.0 * h);
            let forward = (-3.0 * v(a, 0) + 4.0 * v(a, 1) - v(a, 2)) / (2.0 * h);
            let backward = (3.0 * v(a, 0) - 4.0 * v(a, -1) + v(a, -2)) / (2.0 * h);
            if (central - forward).abs().max((central - backward).abs()) > tol {
                return None;
            }
            g[a] = central;
        }
        Some(g)
    }
}

pub fn node_coords(n: usize, resolution: usize, k: usize) -> DVector<f64> {
    let m = resolution as f64;
    if n == 1 {
        DVector::from_vec(vec![k as f64 / m])
    } else {
        DVector::from_vec(vec![(k / resolution) as f64 / m, (k % resolution) as f64 / m])
    }
}
