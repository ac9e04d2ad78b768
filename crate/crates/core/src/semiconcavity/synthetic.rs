//! Random min/max-of-paraboloid pairs with a known argmin.
//!
//! Nodes `x_k` sample a smooth `φ` whose Hessian lies strictly inside
//! `(A, B)`. Then `f = min_k (tangent B-paraboloid at x_k)` is `B`-semi-concave,
//! `g = max_k (tangent A-paraboloid at x_k)` is `A`-semi-convex, `f ≥ φ ≥ g`,
//! and `argmin(f − g)` is exactly the node set.

use nalgebra::DVector;
use rand::Rng;

use super::{argmin_threshold, AnisoBound, ArgminSet, SemiconcavityError};
use crate::cones::SymMatrix;
use crate::sampling::{gaussian_matrix, symmetric};

#[derive(Debug, Clone)]
pub struct ParaboloidPair {
    bound: AnisoBound,
    nodes: Vec<DVector<f64>>,
    values: Vec<f64>,
    grads: Vec<DVector<f64>>,
}

const NODE_BOX: f64 = 1.0;
const MIN_SEPARATION: f64 = 0.3;

impl ParaboloidPair {
    /// Draw `A`, `U = RRᵀ + ½I`, `B = A + U` and nodes of
    /// `φ(x) = ½xᵀCx + β Σ cos x_j`, `C = ½(A + B)`, with `β = 0.4 λ_min(U)`.
    pub fn random<R: Rng>(rng: &mut R, n: usize, n_nodes: usize) -> Self {
        let a = symmetric(rng, n);
        let r = gaussian_matrix(rng, n, n);
        let u = SymMatrix::new(&r * r.transpose()).expect("square").shifted(0.5);
        let b = &a + &u;
        let c = &(&a + &b) * 0.5;
        let beta = 0.4 * u.min_eigenvalue();
        let mut nodes: Vec<DVector<f64>> = Vec::with_capacity(n_nodes);
        let mut attempts = 0;
        while nodes.len() < n_nodes && attempts < 10_000 {
            attempts += 1;
            let x = DVector::from_fn(n, |_, _| rng.random_range(-NODE_BOX..NODE_BOX));
            if nodes.iter().all(|y| (y - &x).norm() >= MIN_SEPARATION) {
                nodes.push(x);
            }
        }
        let values = nodes.iter().map(|x| 0.5 * c.quad(x) + beta * x.iter().map(|t| t.cos()).sum::<f64>()).collect();
        let grads = nodes.iter().map(|x| c.apply(x) - x.map(|t| beta * t.sin())).collect();
        let bound = AnisoBound::new(a, b).expect("U ≥ ½I");
        Self { bound, nodes, values, grads }
    }

    pub fn bound(&self) -> &AnisoBound {
        &self.bound
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn node_gradients(&self) -> &[DVector<f64>] {
        &self.grads
    }

    pub fn dim(&self) -> usize {
        self.bound.dim()
    }

    fn piece(&self, k: usize, hess: &SymMatrix, x: &DVector<f64>) -> f64 {
        let d = x - &self.nodes[k];
        self.values[k] + self.grads[k].dot(&d) + 0.5 * hess.quad(&d)
    }

    fn active(&self, hess: &SymMatrix, x: &DVector<f64>, take_min: bool) -> (usize, f64) {
        let mut best = (0, self.piece(0, hess, x));
        for k in 1..self.nodes.len() {
            let v = self.piece(k, hess, x);
            if (take_min && v < best.1) || (!take_min && v > best.1) {
                best = (k, v);
            }
        }
        best
    }

    pub fn f(&self, x: &DVector<f64>) -> f64 {
        self.active(self.bound.b(), x, true).1
    }

    pub fn g(&self, x: &DVector<f64>) -> f64 {
        self.active(self.bound.a(), x, false).1
    }

    pub fn gap(&self, x: &DVector<f64>) -> f64 {
        self.f(x) - self.g(x)
    }

    /// Newton on the active pieces of `f − g`; the local model has Hessian `U`.
    fn refine(&self, mut x: DVector<f64>) -> DVector<f64> {
        let u = self.bound.u().matrix().clone();
        let chol = u.cholesky().expect("U positive definite");
        for _ in 0..50 {
            let (i, _) = self.active(self.bound.b(), &x, true);
            let (j, _) = self.active(self.bound.a(), &x, false);
            let grad = (&self.grads[i] + self.bound.b().apply(&(&x - &self.nodes[i])))
                - (&self.grads[j] + self.bound.a().apply(&(&x - &self.nodes[j])));
            let step = chol.solve(&grad);
            x -= &step;
            if step.norm() < 1e-15 * (1.0 + x.norm()) {
                break;
            }
        }
        x
    }

    /// Locate `argmin(f − g)` from a uniform grid on `[−w, w]ⁿ`: grid local
    /// minima are refined by Newton, kept when within the argmin threshold,
    /// deduplicated, and lifted by a finite-difference gradient of `f`.
    pub fn extract_argmin(&self, per_axis: usize, half_width: f64) -> Result<ArgminSet, SemiconcavityError> {
        let n = self.dim();
        let total = per_axis.pow(n as u32);
        let h = 2.0 * half_width / (per_axis - 1) as f64;
        let coords = |mut idx: usize| -> Vec<usize> {
            (0..n)
                .map(|_| {
                    let c = idx % per_axis;
                    idx /= per_axis;
                    c
                })
                .collect()
        };
        let point = |c: &[usize]| DVector::from_iterator(n, c.iter().map(|&i| -half_width + h * i as f64));
        let values: Vec<f64> = (0..total).map(|idx| self.gap(&point(&coords(idx)))).collect();

        let mut candidates = Vec::new();
        'grid: for idx in 0..total {
            let c = coords(idx);
            for offset in 0..3usize.pow(n as u32) {
                let mut o = offset;
                let mut stride = 1;
                let mut neighbor = 0isize;
                let mut is_self = true;
                for &ci in &c {
                    let d = (o % 3) as isize - 1;
                    o /= 3;
                    let ni = ci as isize + d;
                    if ni < 0 || ni >= per_axis as isize {
                        neighbor = -1;
                        break;
                    }
                    is_self &= d == 0;
                    neighbor += ni * stride;
                    stride *= per_axis as isize;
                }
                if neighbor >= 0 && !is_self && values[neighbor as usize] < values[idx] {
                    continue 'grid;
                }
            }
            candidates.push(self.refine(point(&c)));
        }

        let refined: Vec<f64> = candidates.iter().map(|x| self.gap(x)).collect();
        let lowest = refined.iter().copied().fold(f64::INFINITY, f64::min);
        let threshold = lowest + (argmin_threshold(&values, 0.0) - values.iter().copied().fold(f64::INFINITY, f64::min));
        let mut kept: Vec<DVector<f64>> = Vec::new();
        for (x, v) in candidates.into_iter().zip(refined) {
            if v <= threshold && kept.iter().all(|y| (y - &x).norm() > 1e-8) {
                kept.push(x);
            }
        }
        let samples = kept
            .into_iter()
            .filter_map(|x| smooth_gradient(|y| self.f(y), &x, 1e-5, 1e-3).map(|p| (x, p)))
            .collect();
        Ok(ArgminSet::new(samples, false))
    }
}

/// Central-difference gradient, or `None` when a one-sided difference
/// disagrees by more than `smooth_tol` in some coordinate.
pub fn smooth_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64, smooth_tol: f64) -> Option<DVector<f64>> {
    let n = x.len();
    let f0 = f(x);
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        let central = (fp - fm) / (2.0 * h);
        let forward = (fp - f0) / h;
        let backward = (f0 - fm) / h;
        if (central - forward).abs().max((central - backward).abs()) > smooth_tol {
            return None;
        }
        grad[i] = central;
    }
    Some(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::seeded;
    use crate::semiconcavity::aniso_gradient_bound;

    #[test]
    fn nodes_are_recovered() {
        let mut rng = seeded(3);
        for n in 1..=2 {
            let pair = ParaboloidPair::random(&mut rng, n, 4);
            let k = pair.extract_argmin(61, 1.2).unwrap();
            assert_eq!(k.len(), pair.nodes().len());
            for (x, p) in &k.samples {
                let (i, d) = pair
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(i, y)| (i, (y - x).norm()))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                assert!(d < 1e-9);
                assert!((p - &pair.node_gradients()[i]).norm() < 1e-6);
            }
            assert!(aniso_gradient_bound(&k, pair.bound(), 1e-6).unwrap().passed());
        }
    }

    #[test]
    fn f_dominates_g() {
        let mut rng = seeded(11);
        let pair = ParaboloidPair::random(&mut rng, 2, 3);
        for _ in 0..200 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
            assert!(pair.gap(&x) >= -1e-12);
        }
    }

    #[test]
    fn kink_is_not_smooth() {
        let f = |x: &DVector<f64>| x[0].abs();
        assert!(smooth_gradient(f, &DVector::from_vec(vec![0.0]), 1e-5, 1e-3).is_none());
        let g = smooth_gradient(f, &DVector::from_vec(vec![0.5]), 1e-5, 1e-3).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9);
    }
}
