//! Seeded random generators for matrices, pairs and vectors.
//!
//! Everything runs off [`ChaCha8Rng`] so a seed reproduces the same stream on
//! every platform and thread count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cones::{ConePair, SymMatrix};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Symmetric matrix with independent standard-normal upper-triangle entries.
pub fn symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let g = gaussian_matrix(rng, n, n);
    SymMatrix::new((&g + g.transpose()) * std::f64::consts::FRAC_1_SQRT_2).expect("square")
}

/// Positive semi-definite `Q diag(d) Qᵀ` with `rank` eigenvalues drawn from
/// `[0.1, 3]` and the rest zero, so the rank is never numerically ambiguous.
pub fn psd_of_rank<R: Rng>(rng: &mut R, n: usize, rank: usize) -> SymMatrix {
    let q = orthogonal(rng, n).columns(0, rank).into_owned();
    let d = DVector::from_fn(rank, |_, _| rng.random_range(0.1..3.0));
    SymMatrix::new(&q * DMatrix::from_diagonal(&d) * q.transpose()).expect("square")
}

/// Haar-ish orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random ordered pair `S₁ ≤ S₂` with `rank(S₂ − S₁) = rank`.
pub fn ordered_pair<R: Rng>(rng: &mut R, n: usize, rank: usize) -> ConePair {
    let s1 = symmetric(rng, n);
    let u = psd_of_rank(rng, n, rank);
    let s2 = &s1 + &u;
    ConePair::new(s1, s2).expect("ordered by construction")
}

/// Random `S` with `S₁ ≤ S ≤ S₂`: `S = S₁ + U^{1/2} W U^{1/2}` with
/// `0 ≤ W ≤ I` drawn from random eigenvalues in `[0, 1]` and a random frame.
pub fn between<R: Rng>(rng: &mut R, pair: &ConePair) -> SymMatrix {
    let n = pair.dim();
    let q = orthogonal(rng, n);
    let d = DVector::from_fn(n, |_, _| rng.random::<f64>());
    let w = &q * DMatrix::from_diagonal(&d) * q.transpose();
    let root = pair.u().sqrt_psd();
    let inner = SymMatrix::new(root.matrix() * w * root.matrix()).expect("square");
    pair.s1() + &inner
}
