use greencone::cones::*;
use greencone::sampling::{between, gaussian_vector, ordered_pair, orthogonal, seeded, symmetric};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn tv(h: &[f64], k: &[f64]) -> TangentVector {
    TangentVector::from_slices(h, k).unwrap()
}

fn pair(s1: f64, s2: f64) -> ConePair {
    ConePair::new(SymMatrix::scalar(s1), SymMatrix::scalar(s2)).unwrap()
}

#[test]
fn omega_examples() {
    assert_eq!(omega(&tv(&[1.0], &[0.0]), &tv(&[0.0], &[1.0])).unwrap(), 1.0);
    assert_eq!(omega(&tv(&[1.0], &[2.0]), &tv(&[3.0], &[4.0])).unwrap(), -2.0);
    let v = tv(&[0.3, -1.0], &[2.0, 0.5]);
    assert_eq!(omega(&v, &v).unwrap(), 0.0);
}

#[test]
fn sg_examples() {
    let p = pair(0.0, 1.0);
    assert!((sg_value(&p, &tv(&[1.0], &[0.5])).unwrap().finite().unwrap() - 0.25).abs() < 1e-15);
    assert!((sg_value(&p, &tv(&[1.0], &[2.0])).unwrap().finite().unwrap() + 2.0).abs() < 1e-15);
    assert_eq!(sg_value(&p, &tv(&[1.0], &[0.0])).unwrap().finite().unwrap(), 0.0);
    assert_eq!(sg_value(&pair(0.0, 0.0), &tv(&[0.0], &[1.0])).unwrap(), SgValue::MinusInfinity);
}

#[test]
fn membership_examples() {
    let p = pair(0.0, 1.0);
    assert!(cone_contains(&p, &tv(&[1.0], &[0.5]), 0.0).unwrap());
    assert!(!cone_contains(&p, &tv(&[1.0], &[2.0]), 0.0).unwrap());
    let mut rng = seeded(5);
    for n in 1..=4 {
        let q = ordered_pair(&mut rng, n, n / 2);
        assert!(cone_contains(&q, &TangentVector::zeros(n), 0.0).unwrap());
    }
}

#[test]
fn decomposition_examples() {
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    let e2 = DVector::from_vec(vec![0.0, 1.0]);
    let (w1, w2) = decompose_nonneg(&e1, &e2).unwrap();
    check_decomposition(&w1, &w2, &e1, &e2);
    let y = DVector::from_vec(vec![0.4, -1.3, 2.0]);
    let (w1, w2) = decompose_nonneg(&y, &DVector::zeros(3)).unwrap();
    assert!((w1.apply(&y) - &y).norm() < 1e-12);
    assert!(w2.apply(&y).norm() < 1e-12);
    let (w1, w2) = decompose_nonneg(&y, &y).unwrap();
    assert!((w1.matrix() - DMatrix::identity(3, 3) * 0.5).amax() < 1e-12);
    assert!((w2.matrix() - DMatrix::identity(3, 3) * 0.5).amax() < 1e-12);
    assert!(matches!(decompose_nonneg(&e1, &(-&e1)), Err(ConeError::NegativeInnerProduct { .. })));
}

fn check_decomposition(w1: &SymMatrix, w2: &SymMatrix, y1: &DVector<f64>, y2: &DVector<f64>) {
    let n = y1.len();
    assert!(w1.min_eigenvalue() >= -1e-10);
    assert!(w2.min_eigenvalue() >= -1e-10);
    assert!((w1.matrix() + w2.matrix() - DMatrix::identity(n, n)).amax() < 1e-9);
    let y = y1 + y2;
    let scale = y1.norm().max(y2.norm()).max(1e-300);
    assert!((w1.apply(&y) - y1).norm() <= 1e-9 * scale);
    assert!((w2.apply(&y) - y2).norm() <= 1e-9 * scale);
}

#[test]
fn witness_examples() {
    let s = cone_witness(&pair(0.0, 1.0), &tv(&[1.0], &[0.5])).unwrap();
    assert!((s.get(0, 0) - 0.5).abs() < 1e-12);
    let p = ConePair::new(SymMatrix::zeros(2), SymMatrix::identity(2)).unwrap();
    let v = tv(&[1.0, 0.0], &[0.3, 0.1]);
    assert!((sg_value(&p, &v).unwrap().finite().unwrap() - 0.2).abs() < 1e-14);
    assert!(validate_witness(&p, &v, &cone_witness(&p, &v).unwrap(), 1e-8).valid);
    let mut rng = seeded(8);
    let q = ordered_pair(&mut rng, 3, 3);
    let edge = TangentVector::on_graph(q.s1(), gaussian_vector(&mut rng, 3));
    assert!(validate_witness(&q, &edge, &cone_witness(&q, &edge).unwrap(), 1e-8).valid);
    assert!(matches!(cone_witness(&pair(0.0, 1.0), &tv(&[1.0], &[2.0])), Err(ConeError::NoWitness { .. })));
}

#[test]
fn transform_examples() {
    let v = tv(&[1.0, -2.0], &[0.5, 3.0]);
    assert_eq!(phi_shear(0.0, &v), v);
    assert_eq!(phi_gl(&DMatrix::identity(2, 2), &v).unwrap(), v);
    assert_eq!(phi_shear(2.0, &tv(&[1.0], &[1.0])), tv(&[1.0], &[3.0]));
    assert!(matches!(GlMap::new(DMatrix::zeros(2, 2)), Err(ConeError::SingularMatrix { .. })));
}

#[test]
fn reduction_examples() {
    let mut rng = seeded(2);
    let t = ordered_pair(&mut rng, 3, 3);
    let r = reduce_degenerate(&t).unwrap();
    assert_eq!(r.m, 3);
    assert_eq!(r.shear, 0.0);
    assert_eq!(r.a, DMatrix::identity(3, 3));

    let s = symmetric(&mut rng, 2);
    let collapsed = ConePair::new(s.clone(), s.clone()).unwrap();
    let r = reduce_degenerate(&collapsed).unwrap();
    assert_eq!(r.m, 0);
    let h = gaussian_vector(&mut rng, 2);
    assert!(cone_contains(&collapsed, &TangentVector::on_graph(&s, h.clone()), 1e-9).unwrap());
    let off = TangentVector::new(h.clone(), s.apply(&h) + DVector::from_vec(vec![0.0, 1e-3])).unwrap();
    assert!(!cone_contains(&collapsed, &off, 1e-9).unwrap());

    let p = ConePair::new(SymMatrix::from_diagonal(&[0.0, 1.0]), SymMatrix::from_diagonal(&[1.0, 1.0])).unwrap();
    let r = reduce_degenerate(&p).unwrap();
    assert_eq!(r.m, 1);
    // block form is diag(S̄ᵢ, N) in the reduced coordinates; shear adds C to both
    assert!((r.sbar1.get(0, 0) - r.shear).abs() < 1e-9);
    assert!((r.sbar2.get(0, 0) - 1.0 - r.shear).abs() < 1e-9);
    assert!((r.n_block.get(0, 0).abs() - (1.0 + r.shear)).abs() < 1e-9 || r.shear == 0.0);
}

#[test]
fn distance_examples() {
    let mut rng = seeded(4);
    let s = symmetric(&mut rng, 3);
    assert_eq!(subspace_distance(&s, &s), 0.0);
    assert_eq!(subspace_distance(&SymMatrix::scalar(0.0), &SymMatrix::scalar(1.0)), 1.0);
    let p = ordered_pair(&mut rng, 2, 2);
    assert!(cone_distance(&p, &p, 1000) <= 1e-12);
    let q = ConePair::new(p.s1().clone(), p.s2().shifted(1.0)).unwrap();
    let coarse = cone_distance(&p, &q, 100);
    let fine = cone_distance(&p, &q, 1000);
    assert!(fine >= coarse && fine > 0.0);
}

fn pair_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..=5).prop_flat_map(|(seed, n)| (Just(seed), Just(n), 0..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn graph_vectors_between_are_members_with_witness((seed, n, rank) in pair_strategy()) {
        let mut rng = seeded(seed);
        let p = ordered_pair(&mut rng, n, rank);
        let s = between(&mut rng, &p);
        let v = TangentVector::on_graph(&s, gaussian_vector(&mut rng, n));
        prop_assert!(cone_contains(&p, &v, 1e-8).unwrap());
        let w = cone_witness(&p, &v).unwrap();
        prop_assert!(validate_witness(&p, &v, &w, 1e-8).valid);
    }

    #[test]
    fn negative_sg_has_no_witness((seed, n, rank) in pair_strategy()) {
        let mut rng = seeded(seed);
        let p = ordered_pair(&mut rng, n, rank);
        let v = TangentVector::new(gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n)).unwrap();
        if let SgValue::Finite(sg) = sg_value(&p, &v).unwrap() {
            if sg < -1e-6 {
                prop_assert!(cone_witness(&p, &v).is_err());
            }
        } else {
            prop_assert!(cone_witness(&p, &v).is_err());
        }
    }

    #[test]
    fn sg_does_not_depend_on_splitting(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = seeded(seed);
        let rank = n / 2;
        let p = ordered_pair(&mut rng, n, rank);
        let v = TangentVector::new(gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n)).unwrap();
        // move v into L₁ + L₂ first
        let h = v.h.clone();
        let x2 = p.range_basis() * DVector::from_fn(p.rank(), |_, _| 0.7);
        let x1 = &h - &x2;
        let v = TangentVector::new(h, p.s1().apply(&x1) + p.s2().apply(&x2)).unwrap();
        let kernel = p.kernel_basis() * gaussian_vector(&mut rng, n - p.rank());
        let a = sg_from_split(&p, &x1, &x2);
        let b = sg_from_split(&p, &(&x1 + &kernel), &(&x2 - &kernel));
        let scale = 1.0 + v.norm().powi(2) * (1.0 + p.s1().norm2() + p.s2().norm2());
        prop_assert!((a - b).abs() <= 1e-9 * scale);
        prop_assert!((sg_value(&p, &v).unwrap().finite().unwrap() - a).abs() <= 1e-9 * scale);
    }

    #[test]
    fn membership_is_symplectically_invariant(seed in any::<u64>(), n in 1usize..=4, c in -3.0f64..3.0) {
        let mut rng = seeded(seed);
        let p = ordered_pair(&mut rng, n, n);
        let v = TangentVector::new(gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n)).unwrap();
        let sg = sg_value(&p, &v).unwrap().finite().unwrap();
        prop_assume!(sg.abs() > 1e-6);
        let inside = sg >= 0.0;
        let sheared = ConePair::new(p.s1().shifted(c), p.s2().shifted(c)).unwrap();
        prop_assert_eq!(cone_contains(&sheared, &phi_shear(c, &v), 0.0).unwrap(), inside);
        let a = orthogonal(&mut rng, n) * DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 0.5 + i as f64));
        let map = GlMap::new(a).unwrap();
        let moved = map.map_pair(&p).unwrap();
        prop_assert_eq!(cone_contains(&moved, &map.apply(&v), 0.0).unwrap(), inside);
        let w = TangentVector::new(gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n)).unwrap();
        prop_assert!((omega(&map.apply(&v), &map.apply(&w)).unwrap() - omega(&v, &w).unwrap()).abs() < 1e-10 * (1.0 + v.norm() * w.norm()));
        prop_assert!((omega(&phi_shear(c, &v), &phi_shear(c, &w)).unwrap() - omega(&v, &w).unwrap()).abs() < 1e-10 * (1.0 + v.norm() * w.norm() * (1.0 + c.abs())));
    }

    #[test]
    fn decomposition_postconditions(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = seeded(seed);
        let y1 = gaussian_vector(&mut rng, n);
        let mut y2 = gaussian_vector(&mut rng, n);
        if y1.dot(&y2) < 0.0 {
            y2 = -y2;
        }
        let (w1, w2) = decompose_nonneg(&y1, &y2).unwrap();
        check_decomposition(&w1, &w2, &y1, &y2);
    }

    #[test]
    fn scalar_membership_is_slope_test(s1 in -5.0f64..5.0, width in 0.0f64..5.0, h in -3.0f64..3.0, k in -20.0f64..20.0) {
        let s2 = s1 + width;
        prop_assume!(width == 0.0 || width > 1e-6);
        let p = pair(s1, s2);
        let v = tv(&[h], &[k]);
        let expected = if h == 0.0 { k == 0.0 } else { let s = k / h; s >= s1 && s <= s2 };
        let margin = if h == 0.0 { 1.0 } else { (k / h - s1).abs().min((k / h - s2).abs()) };
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(cone_contains(&p, &v, 0.0).unwrap(), expected);
    }

    #[test]
    fn fattening_never_lowers_sg(seed in any::<u64>(), n in 1usize..=4, e1 in 0.0f64..0.5, de in 0.0f64..0.5) {
        let mut rng = seeded(seed);
        let p = ordered_pair(&mut rng, n, n);
        let v = TangentVector::new(gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n)).unwrap();
        let fat = |e: f64| ConePair::new(p.s1().shifted(-e), p.s2().shifted(e)).unwrap();
        let a = sg_value(&fat(e1), &v).unwrap().finite().unwrap();
        let b = sg_value(&fat(e1 + de), &v).unwrap().finite().unwrap();
        prop_assert!(b >= a - 1e-9 * (1.0 + a.abs()));
    }
}
