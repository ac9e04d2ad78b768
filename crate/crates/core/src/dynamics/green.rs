use rayon::prelude::*;
use serde::Serialize;

use super::flow::{flow_projected, transport_lifted, FlowOptions, LagrangianFrame, PhasePoint};
use super::{DynamicsError, TonelliSystem};
use crate::cones::SymMatrix;

fn check_time(t: f64) -> Result<(), DynamicsError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `G_t(z) = Dφ_t 𝕍(φ_{−t} z)`.
pub fn pre_green(sys: &TonelliSystem, z: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<SymMatrix, DynamicsError> {
    check_time(t)?;
    let back = flow_projected(sys, z, -t, opts)?;
    let r = transport_lifted(sys, &back.lifted_x, &back.end.p, t, &LagrangianFrame::vertical(sys.dim()), opts)?;
    r.frame.graph(t)
}

/// `G_{−t}(z) = (Dφ_t)⁻¹ 𝕍(φ_t z)`.
pub fn pre_green_minus(sys: &TonelliSystem, z: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<SymMatrix, DynamicsError> {
    check_time(t)?;
    let fwd = flow_projected(sys, z, t, opts)?;
    let r = transport_lifted(sys, &fwd.lifted_x, &fwd.end.p, -t, &LagrangianFrame::vertical(sys.dim()), opts)?;
    r.frame.graph(-t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenRow {
    pub t: f64,
    pub g_t: SymMatrix,
    pub g_minus_t: SymMatrix,
    /// `‖G_t − G_{t_prev}‖₂`, absent on the first rung.
    pub residual_plus: Option<f64>,
    pub residual_minus: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `G_t − G_{−s} > 0` for every pair of rungs.
    PlusAbove,
    /// `G_{−s} − G_t > 0` for every pair of rungs.
    MinusAbove,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

const MONOTONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GreenResult {
    pub rows: Vec<GreenRow>,
    /// `lim G_{−t}`, read off the last rung.
    pub g_minus: SymMatrix,
    /// `lim G_t`, read off the last rung.
    pub g_plus: SymMatrix,
    pub tail_plus: f64,
    pub tail_minus: f64,
    pub t_max: f64,
    pub orientation: Orientation,
    /// Smallest eigenvalue of `G_t − G_{−s}` over all rung pairs.
    pub separation: f64,
    pub plus_family: Monotonicity,
    pub minus_family: Monotonicity,
    /// `G_minus ≤ G_plus` within the ordering tolerance.
    pub ordered: bool,
}

/// Rungs `1, 2, 4, …` up to `t_max`, with `t_max` itself appended when it is
/// not a power of two; a single rung when `t_max < 1`.
pub fn ladder_times(t_max: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut t = 1.0;
    while t <= t_max {
        times.push(t);
        t *= 2.0;
    }
    if times.last().is_none_or(|&last| last < t_max) {
        times.push(t_max);
    }
    times
}

/// Evaluate the ladder; rungs are computed independently and in parallel.
/// On failure the rungs preceding the first failing one are returned with
/// the error.
pub fn green_ladder(sys: &TonelliSystem, z: &PhasePoint, t_max: f64, opts: &FlowOptions) -> (Vec<GreenRow>, Option<DynamicsError>) {
    if let Err(e) = check_time(t_max) {
        return (Vec::new(), Some(e));
    }
    let results: Vec<Result<(f64, SymMatrix, SymMatrix), DynamicsError>> = ladder_times(t_max)
        .into_par_iter()
        .map(|t| Ok((t, pre_green(sys, z, t, opts)?, pre_green_minus(sys, z, t, opts)?)))
        .collect();
    let mut rows: Vec<GreenRow> = Vec::new();
    for r in results {
        match r {
            Ok((t, g_t, g_minus_t)) => {
                let (residual_plus, residual_minus) = match rows.last() {
                    Some(prev) => (
                        Some((&g_t - &prev.g_t).norm2()),
                        Some((&g_minus_t - &prev.g_minus_t).norm2()),
                    ),
                    None => (None, None),
                };
                rows.push(GreenRow { t, g_t, g_minus_t, residual_plus, residual_minus });
            }
            Err(e) => return (rows, Some(e)),
        }
    }
    (rows, None)
}

fn monotonicity(family: &[&SymMatrix]) -> Monotonicity {
    let (mut up, mut down) = (true, true);
    let mut constant = true;
    for w in family.windows(2) {
        let d = w[1] - w[0];
        let (lo, hi) = (d.min_eigenvalue(), d.max_eigenvalue());
        up &= lo >= -MONOTONE_TOL;
        down &= hi <= MONOTONE_TOL;
        constant &= lo >= -MONOTONE_TOL && hi <= MONOTONE_TOL;
    }
    match (constant, up, down) {
        (true, _, _) => Monotonicity::Constant,
        (_, true, _) => Monotonicity::Increasing,
        (_, _, true) => Monotonicity::Decreasing,
        _ => Monotonicity::Mixed,
    }
}

/// `G₊ = lim G_t` and `G₋ = lim G_{−t}` along the ladder up to `t_max`;
/// convergence requires both last-rung gaps below `tail_tol`.
pub fn green_limits(
    sys: &TonelliSystem,
    z: &PhasePoint,
    t_max: f64,
    tail_tol: f64,
    opts: &FlowOptions,
) -> Result<GreenResult, DynamicsError> {
    if !(tail_tol > 0.0) {
        return Err(DynamicsError::InvalidArgument(format!("tail tolerance must be positive, got {tail_tol}")));
    }
    let (rows, err) = green_ladder(sys, z, t_max, opts);
    if let Some(e) = err {
        return Err(e);
    }
    summarize_ladder(rows, t_max, tail_tol)
}

/// Limits, separation and monotonicity diagnostics of a complete ladder.
pub fn summarize_ladder(rows: Vec<GreenRow>, t_max: f64, tail_tol: f64) -> Result<GreenResult, DynamicsError> {
    let Some(last) = rows.last() else {
        return Err(DynamicsError::InvalidArgument("empty ladder".into()));
    };
    let tail_plus = last.residual_plus.unwrap_or(f64::INFINITY);
    let tail_minus = last.residual_minus.unwrap_or(f64::INFINITY);
    let tail = tail_plus.max(tail_minus);
    if !(tail < tail_tol) {
        return Err(DynamicsError::NonConvergence { what: "Green ladder".into(), residual: tail });
    }

    let (mut sep_up, mut sep_down) = (f64::INFINITY, f64::INFINITY);
    for a in &rows {
        for b in &rows {
            let d = &a.g_t - &b.g_minus_t;
            sep_up = sep_up.min(d.min_eigenvalue());
            sep_down = sep_down.min((-&d).min_eigenvalue());
        }
    }
    let orientation = if sep_up > 0.0 {
        Orientation::PlusAbove
    } else if sep_down > 0.0 {
        Orientation::MinusAbove
    } else {
        Orientation::Undetermined
    };
    let plus: Vec<&SymMatrix> = rows.iter().map(|r| &r.g_t).collect();
    let minus: Vec<&SymMatrix> = rows.iter().map(|r| &r.g_minus_t).collect();
    let g_plus = last.g_t.clone();
    let g_minus = last.g_minus_t.clone();
    let ordered = g_minus.le(&g_plus, crate::cones::TOL_ORDER);
    Ok(GreenResult {
        plus_family: monotonicity(&plus),
        minus_family: monotonicity(&minus),
        tail_plus,
        tail_minus,
        t_max,
        orientation,
        separation: sep_up,
        ordered,
        g_minus,
        g_plus,
        rows,
    })
}

/// `(G̃₋, G̃₊) = (2G₋ − G₊, 2G₊ − G₋)`; requires `G₋ ≤ G₊`.
pub fn modified_green(g_minus: &SymMatrix, g_plus: &SymMatrix) -> (SymMatrix, SymMatrix) {
    let gap = g_plus - g_minus;
    (g_minus - &gap, g_plus + &gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn saddle() -> (TonelliSystem, PhasePoint) {
        (TonelliSystem::pendulum(0.0), PhasePoint::from_slices(&[0.0], &[0.0]))
    }

    #[test]
    fn saddle_pre_green() {
        let (sys, z) = saddle();
        let opts = FlowOptions::default();
        for t in [0.25, 1.0] {
            let exact = 2.0 * PI / (2.0 * PI * t).tanh();
            let g = pre_green(&sys, &z, t, &opts).unwrap().get(0, 0);
            let gm = pre_green_minus(&sys, &z, t, &opts).unwrap().get(0, 0);
            assert!((g - exact).abs() < 1e-6 * exact, "{g} {exact}");
            assert!((gm + exact).abs() < 1e-6 * exact);
        }
    }

    #[test]
    fn small_time_is_near_vertical() {
        let (sys, z) = saddle();
        match pre_green(&sys, &z, 1e-9, &FlowOptions::default()) {
            Ok(g) => assert!(g.get(0, 0).abs() > 1e8),
            Err(e) => assert!(matches!(e, DynamicsError::ConjugatePoint { .. })),
        }
    }

    #[test]
    fn saddle_limits() {
        let (sys, z) = saddle();
        let r = green_limits(&sys, &z, 4.0, 1e-8, &FlowOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!((r.g_plus.get(0, 0) - 2.0 * PI).abs() < 1e-6);
        assert!((r.g_minus.get(0, 0) + 2.0 * PI).abs() < 1e-6);
        assert_eq!(r.orientation, Orientation::PlusAbove);
        assert_eq!(r.plus_family, Monotonicity::Decreasing);
        assert_eq!(r.minus_family, Monotonicity::Increasing);
        assert!(r.ordered);
    }

    #[test]
    fn ladder_shape() {
        assert_eq!(ladder_times(4.0), vec![1.0, 2.0, 4.0]);
        assert_eq!(ladder_times(5.0), vec![1.0, 2.0, 4.0, 5.0]);
        assert_eq!(ladder_times(0.5), vec![0.5]);
    }

    #[test]
    fn zero_horizon_rejected() {
        let (sys, z) = saddle();
        assert!(matches!(
            green_limits(&sys, &z, 0.0, 1e-8, &FlowOptions::default()),
            Err(DynamicsError::InvalidArgument(_))
        ));
    }

    #[test]
    fn modified_chain() {
        let (lo, hi) = modified_green(&SymMatrix::scalar(-2.0 * PI), &SymMatrix::scalar(2.0 * PI));
        assert!((lo.get(0, 0) + 6.0 * PI).abs() < 1e-12);
        assert!((hi.get(0, 0) - 6.0 * PI).abs() < 1e-12);
        let s = SymMatrix::scalar(0.7);
        let (a, b) = modified_green(&s, &s);
        assert_eq!((a.get(0, 0), b.get(0, 0)), (0.7, 0.7));
    }
}
