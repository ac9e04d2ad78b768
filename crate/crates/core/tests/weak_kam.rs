use std::f64::consts::PI;
use std::sync::OnceLock;

use greencone::dynamics::{FlowOptions, PhasePoint, TonelliSystem};
use greencone::export::write_solution;
use greencone::sampling::seeded;
use greencone::weak_kam::*;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

const RES: usize = 256;

fn v1(a: f64) -> DVector<f64> {
    DVector::from_vec(vec![a])
}

fn kernel(shift: f64, t: f64) -> ActionKernel {
    build_kernel(&TonelliSystem::pendulum(shift), RES, t, ActionOptions::default()).unwrap()
}

fn critical() -> &'static (ActionKernel, WeakKamSolution, ConjugatePairData) {
    static CELL: OnceLock<(ActionKernel, WeakKamSolution, ConjugatePairData)> = OnceLock::new();
    CELL.get_or_init(|| {
        let k = kernel(0.0, 0.5);
        let s = weak_kam_solve(&k, SolveOptions::default()).unwrap();
        let p = conjugate_pair(&TonelliSystem::pendulum(0.0), &k, &s, ConjugateOptions::default()).unwrap();
        (k, s, p)
    })
}

fn rotational() -> &'static (ActionKernel, WeakKamSolution, ConjugatePairData) {
    static CELL: OnceLock<(ActionKernel, WeakKamSolution, ConjugatePairData)> = OnceLock::new();
    CELL.get_or_init(|| {
        let k = kernel(2.0, 0.5);
        let s = weak_kam_solve(&k, SolveOptions::default()).unwrap();
        let p = conjugate_pair(&TonelliSystem::pendulum(2.0), &k, &s, ConjugateOptions::default()).unwrap();
        (k, s, p)
    })
}

fn long_step() -> &'static ActionKernel {
    static CELL: OnceLock<ActionKernel> = OnceLock::new();
    CELL.get_or_init(|| kernel(0.0, 1.0))
}

fn free_kernel() -> ActionKernel {
    build_kernel(&TonelliSystem::free(1, vec![0.0]).unwrap(), 64, 0.5, ActionOptions::default()).unwrap()
}

#[test]
fn free_action_closed_form() {
    let sys = TonelliSystem::free(1, vec![0.0]).unwrap();
    let r = action(&sys, &v1(0.0), &v1(0.4), 1.0, ActionOptions::default()).unwrap();
    assert!((r.value - 0.08).abs() < 1e-12);
    // the shorter lift wins
    let r = action(&sys, &v1(0.0), &v1(0.7), 1.0, ActionOptions::default()).unwrap();
    assert!((r.value - 0.045).abs() < 1e-12);
    assert_eq!(r.lift, vec![-1]);
}

#[test]
fn action_rejects_out_of_range() {
    let sys = TonelliSystem::pendulum(0.0);
    assert!(action(&sys, &v1(0.0), &v1(0.1), 0.05, ActionOptions::default()).is_err());
    assert!(action(&sys, &v1(0.0), &v1(0.1), 11.0, ActionOptions::default()).is_err());
    let few = ActionOptions { segments: 8, ..Default::default() };
    assert!(action(&sys, &v1(0.0), &v1(0.1), 1.0, few).is_err());
}

#[test]
fn action_is_periodic() {
    let sys = TonelliSystem::pendulum(0.3);
    let o = ActionOptions::default();
    let base = action(&sys, &v1(0.2), &v1(0.55), 0.7, o).unwrap().value;
    for (x, y) in [(1.2, 0.55), (0.2, 1.55), (-0.8, -0.45)] {
        assert!((action(&sys, &v1(x), &v1(y), 0.7, o).unwrap().value - base).abs() <= 1e-10);
    }
}

#[test]
fn action_semigroup_by_grid_minimization() {
    let sys = TonelliSystem::pendulum(0.0);
    let o = ActionOptions { segments: 128, ..Default::default() };
    let (x, z, t) = (0.1, 0.35, 0.5);
    let direct = action(&sys, &v1(x), &v1(z), 2.0 * t, o).unwrap().value;
    let m = 2000;
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for j in 0..m {
        let y = j as f64 / m as f64;
        let v = action(&sys, &v1(x), &v1(y), t, o).unwrap().value + action(&sys, &v1(y), &v1(z), t, o).unwrap().value;
        if v < best {
            best = v;
            arg = j;
        }
    }
    // golden-section polish of the grid minimum
    let f = |y: f64| action(&sys, &v1(x), &v1(y), t, o).unwrap().value + action(&sys, &v1(y), &v1(z), t, o).unwrap().value;
    let (mut a, mut b) = ((arg as f64 - 1.0) / m as f64, (arg as f64 + 1.0) / m as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best = best.min(f(0.5 * (a + b)));
    assert!((direct - best).abs() <= 1e-4, "{direct} vs {best}");
}

#[test]
fn kernel_entries_are_actions_and_periodic() {
    let sys = TonelliSystem::pendulum(0.0);
    let k = build_kernel(&sys, 32, 0.5, ActionOptions::default()).unwrap();
    let mut rng = seeded(1);
    for _ in 0..20 {
        let (i, j) = (rng.random_range(0..32), rng.random_range(0..32));
        let (x, y) = (i as f64 / 32.0, j as f64 / 32.0);
        let shifted = action(&sys, &v1(x + 1.0), &v1(y - 2.0), 0.5, ActionOptions::default()).unwrap().value;
        assert!((k.get(i, j) - shifted).abs() <= 1e-9);
    }
}

#[test]
fn free_kernel_rows_match_closed_form() {
    let k = free_kernel();
    for i in [0, 17, 40] {
        for j in 0..64 {
            let d = (j as f64 - i as f64) / 64.0;
            let d = d - d.round();
            assert!((k.get(i, j) - d * d / 1.0).abs() <= 1e-8);
        }
    }
}

#[test]
fn kernel_additivity_on_random_triples() {
    let short = &critical().0;
    let long = long_step();
    let n = short.nodes();
    let mut rng = seeded(42);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (i, j, l) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        // triangle inequality through the middle node
        assert!(long.get(i, l) <= short.get(i, j) + short.get(j, l) + 1e-3);
        let composed = (0..n).map(|m| short.get(i, m) + short.get(m, l)).fold(f64::INFINITY, f64::min);
        worst = worst.max((long.get(i, l) - composed).abs());
    }
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn kernel_binary_round_trip() {
    let k = free_kernel();
    let mut bytes = Vec::new();
    k.write_binary(&mut bytes).unwrap();
    assert_eq!(&bytes[..8], KERNEL_MAGIC);
    assert_eq!(bytes.len(), 8 + 4 + 4 + 8 + 8 * 64 * 64);
    let back = ActionKernel::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(back.values(), k.values());
    assert_eq!((back.n, back.resolution, back.t_step), (1, 64, 0.5));
    assert!(ActionKernel::read_binary(&bytes[..20]).is_err());
}

#[test]
fn kernel_budget_enforced() {
    let sys = TonelliSystem::product([0.0, 0.0]);
    assert!(build_kernel(&sys, MAX_NODES_2D + 1, 0.5, ActionOptions::default()).is_err());
}

#[test]
fn lax_oleinik_constant_and_order() {
    let k = &critical().0;
    let a = 0.75;
    let t = lax_oleinik(k, &GridFunction::constant(1, RES, a).unwrap()).unwrap();
    for j in 0..RES {
        let col_min = (0..RES).map(|i| k.get(i, j)).fold(f64::INFINITY, f64::min);
        assert_eq!(t.values()[j], a + col_min);
    }
    let mut rng = seeded(9);
    for _ in 0..10 {
        let u = GridFunction::new(1, RES, (0..RES).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let v = u.zip_map(&GridFunction::new(1, RES, (0..RES).map(|_| rng.random_range(0.0..0.5)).collect()).unwrap(), |a, b| a + b);
        let (tu, tv) = (lax_oleinik(k, &u).unwrap(), lax_oleinik(k, &v).unwrap());
        assert!(tu.values().iter().zip(tv.values()).all(|(a, b)| a <= b));
        let (fu, fv) = (lax_oleinik_forward(k, &u).unwrap(), lax_oleinik_forward(k, &v).unwrap());
        assert!(fu.values().iter().zip(fv.values()).all(|(a, b)| a <= b));
        let shift = rng.random_range(-3.0..3.0);
        let ts = lax_oleinik(k, &u.shifted(shift)).unwrap();
        assert!(ts.sup_distance(&tu.shifted(shift)) <= 1e-12);
        let fs = lax_oleinik_forward(k, &u.shifted(shift)).unwrap();
        assert!(fs.sup_distance(&fu.shifted(shift)) <= 1e-12);
    }
    assert!(matches!(
        lax_oleinik(k, &GridFunction::constant(1, 64, 0.0).unwrap()),
        Err(WeakKamError::ResolutionMismatch { .. })
    ));
}

#[test]
fn lax_oleinik_semigroup_against_doubled_step() {
    let fine = ActionOptions { segments: 128, ..Default::default() };
    let short = build_kernel(&TonelliSystem::pendulum(0.0), RES, 0.5, fine).unwrap();
    let long = build_kernel(&TonelliSystem::pendulum(0.0), RES, 1.0, fine).unwrap();
    let short = &short;
    let long = &long;
    let u = GridFunction::from_fn(1, RES, |x| (2.0 * PI * x[0]).sin()).unwrap();
    let twice = lax_oleinik(short, &lax_oleinik(short, &u).unwrap()).unwrap();
    let once = lax_oleinik(long, &u).unwrap();
    let h = 1.0 / RES as f64;
    // restricting the intermediate point to nodes costs at most ½κ(h/2)²,
    // κ = 2·2π coth(2π·½) the curvature of y ↦ A(x, y) + A(y, z) at the saddle
    let kappa = 4.0 * PI / PI.tanh();
    let interpolation = 0.5 * kappa * (0.5 * h).powi(2);
    assert!(twice.sup_distance(&once) <= 2.0 * interpolation);
}

#[test]
fn free_system_has_constant_solution() {
    let k = free_kernel();
    let s = weak_kam_solve(&k, SolveOptions::default()).unwrap();
    assert!(s.c.abs() <= 1e-12);
    assert!(s.u.range() <= 1e-12);
    let sys = TonelliSystem::free(1, vec![0.0]).unwrap();
    let p = conjugate_pair(&sys, &k, &s, ConjugateOptions::default()).unwrap();
    assert!(p.w.sup_distance(&p.u) <= 1e-12);
    assert!(p.gap.max() <= 1e-12);
    let r = local_semiconcavity_check(&sys, &p, Some(10), &SemiconcavityOptions::default(), &FlowOptions::default()).unwrap();
    assert!(r.passed());
}

#[test]
fn pendulum_critical_value_and_profile() {
    let (_, s, _) = critical();
    assert!((s.c - 1.0).abs() <= 1e-3, "c = {}", s.c);
    let exact = GridFunction::from_fn(1, RES, |x| 2.0 / PI * (1.0 - (PI * x[0]).cos().abs())).unwrap();
    let offset = exact.values()[0] - s.u.values()[0];
    assert!(s.u.shifted(offset).sup_distance(&exact) <= 5e-3);
    assert_eq!(s.t_step, 0.5);
}

#[test]
fn critical_conjugate_pair_sits_on_the_saddle() {
    let (_, _, p) = critical();
    let h = 1.0 / RES as f64;
    assert!(!p.i_nodes.is_empty());
    for &k in &p.i_nodes {
        let x = p.u.node(k)[0];
        let d = x.min(1.0 - x);
        assert!(d <= 2.0 * h + 1e-12, "node {k} at {x}");
    }
    assert!(p.w.values().iter().zip(p.u.values()).all(|(w, u)| *w <= u + 1e-8));
    assert_eq!(p.gap.min(), 0.0);
}

#[test]
fn rotational_gap_is_flat() {
    let (_, s, p) = rotational();
    assert!(p.gap.max() <= 5e-3);
    assert!(s.period >= 1);
    assert!(p.lipschitz_constant.is_finite());
    // lifted momenta lie on the energy level of the discrete critical value
    let sys = TonelliSystem::pendulum(2.0);
    for (x, q) in p.i_set.samples.iter().step_by(17) {
        assert!((sys.hamiltonian(x, q) - p.c).abs() <= 1e-9);
    }
    assert!((p.c - s.c).abs() <= 1e-15);
}

#[test]
fn theorem_is_vacuous_at_the_saddle() {
    let (_, _, p) = critical();
    let r = verify_theorem(&TonelliSystem::pendulum(0.0), p, &TheoremOptions::default()).unwrap();
    assert!(r.vacuous);
    assert!(r.all_passed());
    assert!(r.note.is_some());
}

#[test]
fn theorem_margins_and_controls_on_the_circle() {
    let (_, _, p) = rotational();
    let sys = TonelliSystem::pendulum(2.0);
    // one grid step is about 1.2·10⁻² in phase space at this resolution
    let window = TheoremOptions { delta_max: 3e-2, ..Default::default() };
    let base = verify_theorem(&sys, p, &window).unwrap();
    assert!(!base.vacuous && !base.directions.is_empty());
    assert!(base.modified_consistent);
    for d in &base.directions {
        assert!(!d.inside || d.inside_modified);
    }
    let wider = verify_theorem(&sys, p, &TheoremOptions { epsilon: 1e-2, base: Some(base.base_node), ..window }).unwrap();
    assert_eq!(wider.directions.len(), base.directions.len());
    for (a, b) in base.directions.iter().zip(&wider.directions) {
        if let (Some(ma), Some(mb)) = (a.margin, b.margin) {
            assert!(mb >= ma - 1e-12);
        }
        assert!(!a.inside || b.inside);
    }
    let adversarial = TheoremOptions {
        base: Some(base.base_node),
        adversarial: Some(Adversarial { seed: 1, amplitude: 1e-3 }),
        ..window
    };
    let noisy = verify_theorem(&sys, p, &adversarial).unwrap();
    assert!(noisy.failed > 0);
}

#[test]
fn local_semiconcavity_on_the_circle() {
    let (_, _, p) = rotational();
    let r = local_semiconcavity_check(&TonelliSystem::pendulum(2.0), p, None, &SemiconcavityOptions::default(), &FlowOptions::default())
        .unwrap();
    assert!(r.passed(), "{:?} {:?}", r.u.worst_margin, r.w.worst_margin);
    assert!(r.g_minus_t.le(&r.g_t, 0.0));
}

#[test]
fn action_hessians_match_pre_green() {
    let sys = TonelliSystem::pendulum(0.0);
    let z = PhasePoint::from_slices(&[0.25], &[2f64.sqrt()]);
    for t in [0.5, 1.0, 2.0] {
        let r = action_hessian_check(&sys, &z, t, &HessianCheckOptions::default(), &FlowOptions::default()).unwrap();
        assert!(r.max_rel_err() <= 1e-3, "T = {t}: {}", r.max_rel_err());
    }
    let free = TonelliSystem::free(1, vec![0.0]).unwrap();
    let r = action_hessian_check(&free, &PhasePoint::from_slices(&[0.1], &[0.3]), 2.0, &HessianCheckOptions::default(), &FlowOptions::default())
        .unwrap();
    assert!(r.max_rel_err() <= 1e-8);
    assert!((r.g_plus_flow.get(0, 0) - 0.5).abs() <= 1e-9);
}

#[test]
fn solution_csv_has_one_row_per_node() {
    let (_, _, p) = critical();
    let mut out = Vec::new();
    write_solution(&mut out, p).unwrap();
    let mut reader = csv::Reader::from_reader(out.as_slice());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["x", "u", "w", "gap", "in_i_set", "p"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), RES);
    let flagged = rows.iter().filter(|r| &r[4] == "1").count();
    assert_eq!(flagged, p.i_nodes.len());
    let u0: f64 = rows[0][1].parse().unwrap();
    assert_eq!(u0, p.u.values()[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lax_oleinik_commutes_with_constants(seed in any::<u64>(), a in -10.0f64..10.0) {
        let k = free_kernel();
        let mut rng = seeded(seed);
        let u = GridFunction::new(1, 64, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let lhs = lax_oleinik(&k, &u.shifted(a)).unwrap();
        let rhs = lax_oleinik(&k, &u).unwrap().shifted(a);
        prop_assert!(lhs.sup_distance(&rhs) <= 1e-12);
    }

    #[test]
    fn free_action_matches_closed_form(x in 0.0f64..1.0, y in 0.0f64..1.0, t in 0.2f64..5.0) {
        let sys = TonelliSystem::free(1, vec![0.0]).unwrap();
        let d = y - x;
        let d = d - d.round();
        let r = action(&sys, &v1(x), &v1(y), t, ActionOptions::default()).unwrap();
        prop_assert!((r.value - d * d / (2.0 * t)).abs() <= 1e-10);
    }
}
