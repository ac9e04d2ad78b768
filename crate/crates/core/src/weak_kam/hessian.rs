use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::action::{ActionContext, ActionOptions};
use super::WeakKamError;
use crate::cones::SymMatrix;
use crate::dynamics::{flow_lifted, pre_green, pre_green_minus, FlowOptions, PhasePoint, TonelliSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianCheckOptions {
    /// Coarse segment count; the fine level uses twice as many.
    pub segments: usize,
    /// Finite-difference step on the endpoint gradients.
    pub fd_step: f64,
}

impl Default for HessianCheckOptions {
    fn default() -> Self {
        Self { segments: 256, fd_step: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianCheckReport {
    pub t: f64,
    pub segments: usize,
    pub g_plus_flow: SymMatrix,
    pub g_plus_action: SymMatrix,
    pub g_minus_flow: SymMatrix,
    pub g_minus_action: SymMatrix,
    /// Relative operator-norm errors.
    pub rel_err_plus: f64,
    pub rel_err_minus: f64,
    /// Row-major entrywise relative errors.
    pub entry_err_plus: Vec<f64>,
    pub entry_err_minus: Vec<f64>,
    /// Largest entry change between steps `h` and `h/2` of the
    /// finite difference at the fine level, divided by 3.
    pub fd_error_estimate: f64,
}

impl HessianCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.rel_err_plus.max(self.rel_err_minus)
    }
}

/// Positions of the orbit through `z` at `start + k t/N`, lifted.
fn orbit_curve(sys: &TonelliSystem, z: &PhasePoint, start: f64, t: f64, segs: usize, flow: &FlowOptions) -> Result<Vec<f64>, WeakKamError> {
    let n = sys.dim();
    let mut curve = Vec::with_capacity((segs + 1) * n);
    for k in 0..=segs {
        let s = start + t * k as f64 / segs as f64;
        let r = flow_lifted(sys, &z.x, &z.p, s, flow)?;
        curve.extend_from_slice(r.lifted_x.as_slice());
    }
    Ok(curve)
}

/// Hessian block of the discrete action in one endpoint, by central
/// differences of the analytic endpoint gradient, minimizers warm-started
/// from `curve`.
fn endpoint_hessian(ctx: &ActionContext, curve: &[f64], moving_end: bool, step: f64) -> Result<DMatrix<f64>, WeakKamError> {
    let n = ctx.sys.dim();
    let segs = ctx.opts.segments;
    let x0: Vec<f64> = curve[..n].to_vec();
    let y0: Vec<f64> = curve[segs * n..].to_vec();
    let grad = |dir: usize, h: f64| -> Result<DVector<f64>, WeakKamError> {
        let (mut x, mut y) = (x0.clone(), y0.clone());
        let mut init = curve.to_vec();
        if moving_end {
            y[dir] += h;
        } else {
            x[dir] += h;
        }
        for i in 0..n {
            init[i] = x[i];
            init[segs * n + i] = y[i];
        }
        let r = ctx.to_lift(&x, &y, Some(&init))?;
        if !r.converged {
            return Err(WeakKamError::NonConvergence { what: "action minimizer".into(), residual: r.value });
        }
        let (gx, gy) = ctx.endpoint_gradients(&r)?;
        Ok(if moving_end { gy } else { gx })
    };
    let mut h = DMatrix::zeros(n, n);
    for d in 0..n {
        let col = (grad(d, step)? - grad(d, -step)?) / (2.0 * step);
        h.set_column(d, &col);
    }
    Ok(h)
}

fn hessians(sys: &TonelliSystem, z: &PhasePoint, t: f64, segs: usize, step: f64, flow: &FlowOptions) -> Result<(DMatrix<f64>, DMatrix<f64>), WeakKamError> {
    let ctx = ActionContext::new(sys, t, ActionOptions { segments: segs, max_iter: 200, ..Default::default() })?;
    let back = orbit_curve(sys, z, -t, t, segs, flow)?;
    let fwd = orbit_curve(sys, z, 0.0, t, segs, flow)?;
    let yy = endpoint_hessian(&ctx, &back, true, step)?;
    let xx = endpoint_hessian(&ctx, &fwd, false, step)?;
    Ok((yy, -xx))
}

fn rel_err(a: &SymMatrix, b: &SymMatrix) -> f64 {
    (a - b).norm2() / b.norm2().max(f64::MIN_POSITIVE)
}

fn entry_err(a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
    a.to_row_major().iter().zip(b.to_row_major()).map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)).collect()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Compare `G_T(z)` with `∂²₂₂A^T(π φ_{−T} z, π z)` and `G_{−T}(z)` with
/// `−∂²₁₁A^T(π z, π φ_T z)`. Action Hessians are Richardson-extrapolated
/// from `N` and `2N` segments, cancelling the `O(Δt²)` discretization error.
pub fn action_hessian_check(
    sys: &TonelliSystem,
    z: &PhasePoint,
    t: f64,
    opts: &HessianCheckOptions,
    flow: &FlowOptions,
) -> Result<HessianCheckReport, WeakKamError> {
    let g_plus_flow = pre_green(sys, z, t, flow)?;
    let g_minus_flow = pre_green_minus(sys, z, t, flow)?;
    let (p1, m1) = hessians(sys, z, t, opts.segments, opts.fd_step, flow)?;
    let (p2, m2) = hessians(sys, z, t, 2 * opts.segments, opts.fd_step, flow)?;
    let (p3, m3) = hessians(sys, z, t, 2 * opts.segments, 0.5 * opts.fd_step, flow)?;
    let fd_error_estimate = max_diff(&p2, &p3).max(max_diff(&m2, &m3)) / 3.0;
    let g_plus_action = SymMatrix::new((p2 * 4.0 - p1) / 3.0)?;
    let g_minus_action = SymMatrix::new((m2 * 4.0 - m1) / 3.0)?;
    Ok(HessianCheckReport {
        t,
        segments: opts.segments,
        rel_err_plus: rel_err(&g_plus_action, &g_plus_flow),
        rel_err_minus: rel_err(&g_minus_action, &g_minus_flow),
        entry_err_plus: entry_err(&g_plus_action, &g_plus_flow),
        entry_err_minus: entry_err(&g_minus_action, &g_minus_flow),
        fd_error_estimate,
        g_plus_flow,
        g_plus_action,
        g_minus_flow,
        g_minus_action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_system_is_one_over_t() {
        let sys = TonelliSystem::free(1, vec![0.3]).unwrap();
        let z = PhasePoint::from_slices(&[0.1], &[0.2]);
        let r = action_hessian_check(&sys, &z, 1.5, &HessianCheckOptions { segments: 16, ..Default::default() }, &FlowOptions::default()).unwrap();
        assert!((r.g_plus_action.get(0, 0) - 1.0 / 1.5).abs() < 1e-8);
        assert!((r.g_minus_action.get(0, 0) + 1.0 / 1.5).abs() < 1e-8);
        assert!(r.max_rel_err() < 1e-8);
        assert!(r.fd_error_estimate < 1e-8);
        assert_eq!(r.entry_err_plus.len(), 1);
    }
}
