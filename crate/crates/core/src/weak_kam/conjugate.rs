use nalgebra::DVector;
use serde::Serialize;

use super::grid::GridFunction;
use super::kernel::ActionKernel;
use super::lax_oleinik::lax_oleinik_forward;
use super::solve::WeakKamSolution;
use super::WeakKamError;
use crate::dynamics::TonelliSystem;
use crate::semiconcavity::{argmin_threshold, torus_delta, ArgminSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Lower bound for the gap threshold, above the discretization noise of `u − w`.
    pub gap_floor: f64,
    /// Largest allowed disagreement between central and one-sided slopes of `u`.
    pub smooth_tol: f64,
    /// Put each lifted point on the energy level `H = c` along its momentum direction.
    pub energy_lift: bool,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        Self { max_iter: 50_000, tol: 1e-10, gap_floor: 1e-5, smooth_tol: 1e-3, energy_lift: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugatePairData {
    pub u: GridFunction,
    pub w: GridFunction,
    /// `u − w`, shifted to minimum zero.
    pub gap: GridFunction,
    pub c: f64,
    pub gap_threshold: f64,
    /// Grid nodes of `I(u, w)`.
    pub i_nodes: Vec<usize>,
    /// Nodes of `I(u, w)` dropped because `u` failed the smoothness test there.
    pub non_smooth: Vec<usize>,
    #[serde(skip)]
    pub i_set: ArgminSet,
    /// Largest `‖Δp‖/‖Δx‖` over pairs of lifted points; finite for a Lipschitz graph.
    pub lipschitz_constant: f64,
    pub iterations: usize,
}

impl ConjugatePairData {
    /// Lifted point `(x, p)` for a node of `I(u, w)`, if it was kept.
    pub fn lifted(&self, node: usize) -> Option<&(DVector<f64>, DVector<f64>)> {
        self.i_nodes
            .iter()
            .filter(|k| !self.non_smooth.contains(k))
            .position(|&k| k == node)
            .map(|idx| &self.i_set.samples[idx])
    }
}

/// Move `p` along `p + shift` (radially) so that `H(x, p) = c`; momenta with
/// `V(x) ≥ c` collapse to `−shift`.
pub fn energy_lift(sys: &TonelliSystem, x: &DVector<f64>, p: &DVector<f64>, c: f64) -> DVector<f64> {
    let shift = sys.shift();
    let q = p + &shift;
    let norm = q.norm();
    let at = |s: f64| {
        let pp = if norm > 0.0 { &q * (s / norm) - &shift } else { -&shift };
        (sys.hamiltonian(x, &pp) - c, pp)
    };
    if at(0.0).0 >= 0.0 || norm == 0.0 {
        return -shift;
    }
    let mut hi = norm.max(1.0);
    while at(hi).0 < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    at(0.5 * (lo + hi)).1
}

/// Forward weak KAM solution `w` paired with `u`, the gap `u − w` and the
/// lifted set `I(u, w)`. Iterates `w ← T⁺_t w − c t` from `w = u`,
/// renormalized so that `max(w − u) = 0`.
pub fn conjugate_pair(
    sys: &TonelliSystem,
    kernel: &ActionKernel,
    solution: &WeakKamSolution,
    opts: ConjugateOptions,
) -> Result<ConjugatePairData, WeakKamError> {
    let u = &solution.u;
    let c = solution.c;
    let ct = c * kernel.t_step;
    let mut w = u.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = lax_oleinik_forward(kernel, &w)?.shifted(-ct);
        let top = next.values().iter().zip(u.values()).fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
        let next = next.shifted(-top);
        change = next.sup_distance(&w);
        w = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(WeakKamError::NonConvergence { what: "forward Lax–Oleinik fixed point".into(), residual: change });
    }
    let raw = u.zip_map(&w, |a, b| a - b);
    let gap = raw.shifted(-raw.min());
    let gap_threshold = argmin_threshold(gap.values(), opts.gap_floor);
    let i_nodes: Vec<usize> = (0..gap.len()).filter(|&k| gap.values()[k] <= gap_threshold).collect();
    let mut samples = Vec::new();
    let mut non_smooth = Vec::new();
    for &k in &i_nodes {
        match u.smooth_gradient(k, opts.smooth_tol) {
            Some(p) => {
                let x = u.node(k);
                let p = if opts.energy_lift { energy_lift(sys, &x, &p, c) } else { p };
                samples.push((x, p));
            }
            None => non_smooth.push(k),
        }
    }
    let mut lipschitz_constant = 0.0f64;
    for (i, (xi, pi)) in samples.iter().enumerate() {
        for (xj, pj) in &samples[i + 1..] {
            lipschitz_constant = lipschitz_constant.max((pj - pi).norm() / torus_delta(xi, xj).norm());
        }
    }
    Ok(ConjugatePairData {
        u: u.clone(),
        w,
        gap,
        c,
        gap_threshold,
        i_nodes,
        non_smooth,
        i_set: ArgminSet::new(samples, true),
        lipschitz_constant,
        iterations,
    })
}
