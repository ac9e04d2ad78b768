use rand::Rng;

use super::{cone_contains, ConePair, SymMatrix, TangentVector};
use crate::sampling;

/// Operator-norm distance `‖G₁ − G₂‖₂` between two Lagrangian graphs.
pub fn subspace_distance(g1: &SymMatrix, g2: &SymMatrix) -> f64 {
    (g1 - g2).norm2()
}

/// Reference sample size used on the far side of the one-sided distances.
const REFERENCE_SAMPLES: usize = 2048;
const SAMPLING_SEED: u64 = 0x6a09_e667_f3bc_c908;

/// Sampled Hausdorff distance between the unit-sphere sections of two cones.
///
/// Each side draws `n_samples` unit vectors of its cone; the distance from a
/// sample to the other cone is zero when the sample is a member and
/// otherwise the nearest of a fixed reference sample of that cone. The
/// stream is seeded, so growing `n_samples` only adds terms to the maxima
/// and the estimate is non-decreasing in `n_samples`.
pub fn cone_distance(a: &ConePair, b: &ConePair, n_samples: usize) -> f64 {
    let a_samples = sphere_samples(a, n_samples, SAMPLING_SEED);
    let b_samples = sphere_samples(b, n_samples, SAMPLING_SEED);
    let a_ref = sphere_samples(a, REFERENCE_SAMPLES, SAMPLING_SEED ^ 0xff);
    let b_ref = sphere_samples(b, REFERENCE_SAMPLES, SAMPLING_SEED ^ 0xff);
    one_sided(&a_samples, b, &b_ref).max(one_sided(&b_samples, a, &a_ref))
}

fn one_sided(samples: &[TangentVector], target: &ConePair, reference: &[TangentVector]) -> f64 {
    samples
        .iter()
        .map(|s| {
            if cone_contains(target, s, 1e-12).unwrap_or(false) {
                0.0
            } else {
                reference.iter().map(|r| (s - r).norm()).fold(f64::INFINITY, f64::min)
            }
        })
        .fold(0.0, f64::max)
}

fn sphere_samples(pair: &ConePair, count: usize, seed: u64) -> Vec<TangentVector> {
    let mut rng = sampling::seeded(seed);
    (0..count).map(|_| sample_unit(pair, &mut rng)).collect()
}

fn sample_unit<R: Rng>(pair: &ConePair, rng: &mut R) -> TangentVector {
    let s = sampling::between(rng, pair);
    let h = sampling::gaussian_vector(rng, pair.dim());
    TangentVector::on_graph(&s, h).normalized()
}
