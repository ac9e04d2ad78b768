use std::collections::VecDeque;

use serde::Serialize;

use super::grid::GridFunction;
use super::kernel::ActionKernel;
use super::lax_oleinik::lax_oleinik;
use super::WeakKamError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Iterations without a new smallest residual before switching to Cesàro averaging.
    pub stall_window: usize,
    /// Longest eventual period of the iterates that is detected.
    pub max_period: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 50_000, tol: 1e-10, stall_window: 20_000, max_period: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakKamSolution {
    pub u: GridFunction,
    /// Mañé critical value estimated from the mean decrement per step.
    pub c: f64,
    /// Spread `(max − min)(T u − u)/t`; an error bar on `c`.
    pub c_spread: f64,
    /// `sup |T_t u + c t − u|`.
    pub residual: f64,
    pub iterations: usize,
    /// Eventual period of the normalized iterates; 1 when they converge.
    pub period: usize,
    pub cesaro: bool,
    pub t_step: f64,
}

fn decrement(kernel: &ActionKernel, u: &GridFunction) -> Result<(GridFunction, f64, f64, f64), WeakKamError> {
    let tu = lax_oleinik(kernel, u)?;
    let d: Vec<f64> = tu.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let c = -mean / kernel.t_step;
    let residual = d.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    Ok((tu, c, (hi - lo) / kernel.t_step, residual))
}

fn pinned(u: &GridFunction) -> GridFunction {
    u.shifted(-u.values()[0])
}

/// Iterate `u ← T_t u` from `u ≡ 0`, renormalized so `u(x₀) = 0`.
///
/// Min-plus iterates are eventually periodic: `T^p u = u − p c t`. Period 1
/// is plain convergence. For `p > 1` the function
/// `min_{j<p} (T^j u + j c t)` is an exact fixed point and is returned.
/// Iterates that neither settle nor repeat are Cesàro-averaged after
/// `stall_window` iterations without a new smallest residual.
pub fn weak_kam_solve(kernel: &ActionKernel, opts: SolveOptions) -> Result<WeakKamSolution, WeakKamError> {
    let mut u = GridFunction::constant(kernel.n, kernel.resolution, 0.0)?;
    // normalized iterates with their cumulative offsets
    let mut history: VecDeque<(GridFunction, f64)> = VecDeque::new();
    let mut offset = 0.0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut mean: Option<(GridFunction, usize)> = None;
    for it in 1..=opts.max_iter {
        let (tu, _, _, residual) = decrement(kernel, &u)?;
        offset += tu.values()[0];
        let next = pinned(&tu);
        let change = next.sup_distance(&u);
        u = next;
        if change < opts.tol {
            return finish(kernel, u, it, 1, false);
        }
        let probe = u.len() / 2;
        let repeats = |h: &GridFunction| (h.values()[probe] - u.values()[probe]).abs() < opts.tol && h.sup_distance(&u) < opts.tol;
        if let Some(p) = (2..=history.len().min(opts.max_period)).find(|&p| repeats(&history[history.len() - p].0)) {
            let start = history.len() - p;
            let (_, s0) = history[start];
            let c_t = (s0 - offset) / p as f64;
            let mut v = history[start].0.clone();
            for j in 1..p {
                let (uj, sj) = &history[start + j];
                v = v.zip_map(uj, |a, b| a.min(b + sj - s0 + j as f64 * c_t));
            }
            return finish(kernel, pinned(&v), it, p, false);
        }
        history.push_back((u.clone(), offset));
        if history.len() > opts.max_period {
            history.pop_front();
        }
        if let Some((avg, count)) = mean.as_mut() {
            let k = *count as f64;
            let updated = avg.zip_map(&u, |a, b| (a * k + b) / (k + 1.0));
            let step = updated.sup_distance(avg);
            *avg = updated;
            *count += 1;
            if step < opts.tol {
                return finish(kernel, avg.clone(), it, 0, true);
            }
            continue;
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= opts.stall_window {
                mean = Some((u.clone(), 1));
            }
        }
    }
    let (_, _, _, residual) = decrement(kernel, mean.map(|m| m.0).as_ref().unwrap_or(&u))?;
    Err(WeakKamError::NonConvergence { what: "Lax–Oleinik fixed point".into(), residual })
}

fn finish(kernel: &ActionKernel, u: GridFunction, iterations: usize, period: usize, cesaro: bool) -> Result<WeakKamSolution, WeakKamError> {
    let (_, c, c_spread, residual) = decrement(kernel, &u)?;
    Ok(WeakKamSolution { u, c, c_spread, residual, iterations, period, cesaro, t_step: kernel.t_step })
}
