//! Discrete action `Σ L(midpoint, slope)·Δt` minimized over interior nodes.

use nalgebra::DVector;

use super::WeakKamError;
use crate::dynamics::{Kinetic, LagDerivs, TonelliSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionOptions {
    pub segments: usize,
    /// Lifts `y + m` with `‖m − m₀‖∞ ≤ winding` are tried, `m₀` the free optimum.
    pub winding: i32,
    pub max_iter: usize,
    /// Stop once the interior gradient is below this in max norm.
    pub grad_tol: f64,
}

impl Default for ActionOptions {
    fn default() -> Self {
        Self { segments: 32, winding: 2, max_iter: 100, grad_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionResult {
    pub value: f64,
    /// Nodes `q_0 = x, …, q_N = y + m`, flattened with stride `n`.
    pub curve: Vec<f64>,
    pub lift: Vec<i32>,
    pub iterations: usize,
    pub converged: bool,
}

impl ActionResult {
    pub fn node(&self, k: usize, n: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.curve[k * n..(k + 1) * n])
    }
}

pub const MIN_TIME: f64 = 0.1;
pub const MAX_TIME: f64 = 10.0;
pub const MIN_SEGMENTS: usize = 16;

/// Per-system data shared by many action evaluations.
#[derive(Debug, Clone)]
pub struct ActionContext<'a> {
    pub sys: &'a TonelliSystem,
    pub t: f64,
    pub opts: ActionOptions,
    max_v: f64,
}

struct Workspace {
    n: usize,
    segments: usize,
    dt: f64,
    jets: Vec<LagDerivs>,
    grad: Vec<f64>,
    diag: Vec<[[f64; 2]; 2]>,
    off: Vec<[[f64; 2]; 2]>,
    step: Vec<f64>,
    trial: Vec<f64>,
}

fn inv2(m: &[[f64; 2]; 2], n: usize) -> Option<[[f64; 2]; 2]> {
    if n == 1 {
        return (m[0][0] > 0.0).then(|| [[1.0 / m[0][0], 0.0], [0.0, 0.0]]);
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    // positive definite pivot
    if !(m[0][0] > 0.0 && det > 0.0) {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn tr2(a: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn mv2(a: &[[f64; 2]; 2], x: &[f64], n: usize) -> [f64; 2] {
    let mut y = [0.0; 2];
    for i in 0..n {
        for j in 0..n {
            y[i] += a[i][j] * x[j];
        }
    }
    y
}

impl Workspace {
    fn new(n: usize, segments: usize, t: f64) -> Self {
        let interior = segments - 1;
        Self {
            n,
            segments,
            dt: t / segments as f64,
            jets: vec![LagDerivs::default(); segments],
            grad: vec![0.0; interior * n],
            diag: vec![[[0.0; 2]; 2]; interior],
            off: vec![[[0.0; 2]; 2]; interior],
            step: vec![0.0; interior * n],
            trial: vec![0.0; (segments + 1) * n],
        }
    }

    fn value(&mut self, sys: &TonelliSystem, q: &[f64]) -> Result<f64, WeakKamError> {
        let n = self.n;
        let mut total = 0.0;
        let mut mid = [0.0; 2];
        let mut vel = [0.0; 2];
        let mut jet = LagDerivs::default();
        for k in 0..self.segments {
            for i in 0..n {
                mid[i] = 0.5 * (q[k * n + i] + q[(k + 1) * n + i]);
                vel[i] = (q[(k + 1) * n + i] - q[k * n + i]) / self.dt;
            }
            sys.lagrangian_into(&mid[..n], &vel[..n], &mut jet)?;
            total += jet.value;
        }
        Ok(total * self.dt)
    }

    /// Value, interior gradient and block-tridiagonal Hessian at `q`.
    fn assemble(&mut self, sys: &TonelliSystem, q: &[f64]) -> Result<f64, WeakKamError> {
        let (n, dt) = (self.n, self.dt);
        let mut total = 0.0;
        let mut mid = [0.0; 2];
        let mut vel = [0.0; 2];
        for k in 0..self.segments {
            for i in 0..n {
                mid[i] = 0.5 * (q[k * n + i] + q[(k + 1) * n + i]);
                vel[i] = (q[(k + 1) * n + i] - q[k * n + i]) / dt;
            }
            sys.lagrangian_into(&mid[..n], &vel[..n], &mut self.jets[k])?;
            total += self.jets[k].value;
        }
        let interior = self.segments - 1;
        for j in 0..interior {
            // node j + 1 is the right end of segment j and the left end of segment j + 1
            let (l, r) = (&self.jets[j], &self.jets[j + 1]);
            for i in 0..n {
                self.grad[j * n + i] = dt * 0.5 * (l.lx[i] + r.lx[i]) + (l.lv[i] - r.lv[i]);
            }
            let mut d = [[0.0; 2]; 2];
            let mut o = [[0.0; 2]; 2];
            for a in 0..n {
                for b in 0..n {
                    let lxx = |jet: &LagDerivs| if a == b { jet.lxx[a] } else { 0.0 };
                    d[a][b] = dt * 0.25 * (lxx(l) + lxx(r)) + (l.lvv[a][b] + r.lvv[a][b]) / dt;
                    o[a][b] = dt * 0.25 * lxx(r) - r.lvv[a][b] / dt;
                }
            }
            self.diag[j] = d;
            self.off[j] = o;
        }
        Ok(total * dt)
    }

    /// Solve `(H + μI) s = −g` by block elimination; `None` on a non-positive pivot.
    fn solve(&mut self, mu: f64) -> Option<()> {
        let n = self.n;
        let m = self.segments - 1;
        let mut piv: Vec<[[f64; 2]; 2]> = Vec::with_capacity(m);
        let mut rhs: Vec<[f64; 2]> = Vec::with_capacity(m);
        for j in 0..m {
            let mut d = self.diag[j];
            for a in 0..n {
                d[a][a] += mu;
            }
            let mut r = [0.0; 2];
            for a in 0..n {
                r[a] = -self.grad[j * n + a];
            }
            if j > 0 {
                // D_j − O_{j−1}ᵀ P_{j−1}⁻¹ O_{j−1}
                let o = self.off[j - 1];
                let pinv = inv2(&piv[j - 1], n)?;
                let ot = tr2(&o);
                let corr = mul2(&mul2(&ot, &pinv), &o);
                let rc = mv2(&mul2(&ot, &pinv), &rhs[j - 1], n);
                for a in 0..n {
                    r[a] -= rc[a];
                    for b in 0..n {
                        d[a][b] -= corr[a][b];
                    }
                }
            }
            inv2(&d, n)?;
            piv.push(d);
            rhs.push(r);
        }
        let mut next = [0.0; 2];
        for j in (0..m).rev() {
            let mut r = rhs[j];
            if j + 1 < m {
                let c = mv2(&self.off[j], &next, n);
                for a in 0..n {
                    r[a] -= c[a];
                }
            }
            let x = mv2(&inv2(&piv[j], n)?, &r, n);
            for a in 0..n {
                self.step[j * n + a] = x[a];
            }
            next = x;
        }
        Some(())
    }
}

impl<'a> ActionContext<'a> {
    pub fn new(sys: &'a TonelliSystem, t: f64, opts: ActionOptions) -> Result<Self, WeakKamError> {
        if !(MIN_TIME..=MAX_TIME).contains(&t) {
            return Err(WeakKamError::InvalidArgument(format!(
                "action time {t} outside [{MIN_TIME}, {MAX_TIME}]; compose through the semigroup property"
            )));
        }
        if opts.segments < MIN_SEGMENTS {
            return Err(WeakKamError::InvalidArgument(format!("need at least {MIN_SEGMENTS} segments")));
        }
        Ok(Self { sys, t, opts, max_v: sys.max_potential() })
    }

    fn free_optimum(&self, x: &[f64], y: &[f64]) -> Vec<i32> {
        let c = self.sys.shift();
        (0..x.len()).map(|i| (x[i] + self.t * c[i] - y[i]).round() as i32).collect()
    }

    /// Jensen bound `|d|²/2t − c·d − t·max V` for quadratic kinetic energy;
    /// `−∞` otherwise.
    fn lower_bound(&self, x: &[f64], target: &[f64]) -> f64 {
        if !matches!(self.sys.kinetic(), Kinetic::Quadratic) {
            return f64::NEG_INFINITY;
        }
        let c = self.sys.shift();
        let mut b = -self.t * self.max_v;
        for i in 0..x.len() {
            let d = target[i] - x[i];
            b += d * d / (2.0 * self.t) - c[i] * d;
        }
        b
    }

    fn lifts(&self, x: &[f64], y: &[f64]) -> Vec<(f64, Vec<i32>)> {
        let m0 = self.free_optimum(x, y);
        let w = self.opts.winding;
        let mut out = Vec::new();
        let offsets: Vec<Vec<i32>> = if x.len() == 1 {
            (-w..=w).map(|a| vec![a]).collect()
        } else {
            (-w..=w).flat_map(|a| (-w..=w).map(move |b| vec![a, b])).collect()
        };
        for off in offsets {
            let m: Vec<i32> = m0.iter().zip(&off).map(|(a, b)| a + b).collect();
            let target: Vec<f64> = y.iter().zip(&m).map(|(v, k)| v + *k as f64).collect();
            out.push((self.lower_bound(x, &target), m));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        out
    }

    /// Minimize over the lift `target` of the endpoint, from `init` (full
    /// curve including endpoints) or the straight line.
    pub fn to_lift(&self, x: &[f64], target: &[f64], init: Option<&[f64]>) -> Result<ActionResult, WeakKamError> {
        let n = self.sys.dim();
        let segs = self.opts.segments;
        let mut ws = Workspace::new(n, segs, self.t);
        let mut q: Vec<f64> = match init {
            Some(c) if c.len() == (segs + 1) * n => c.to_vec(),
            _ => {
                let mut c = vec![0.0; (segs + 1) * n];
                for k in 0..=segs {
                    let s = k as f64 / segs as f64;
                    for i in 0..n {
                        c[k * n + i] = x[i] + s * (target[i] - x[i]);
                    }
                }
                c
            }
        };
        for i in 0..n {
            q[i] = x[i];
            q[segs * n + i] = target[i];
        }
        let mut converged = false;
        let mut iterations = 0;
        let mut value = ws.assemble(self.sys, &q)?;
        while iterations < self.opts.max_iter {
            let gnorm = ws.grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            if gnorm <= self.opts.grad_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut mu = 0.0;
            while ws.solve(mu).is_none() {
                mu = if mu == 0.0 { 1e-8 / ws.dt } else { mu * 10.0 };
                if mu > 1e12 {
                    break;
                }
            }
            if mu > 1e12 {
                // steepest descent fallback
                for (s, g) in ws.step.iter_mut().zip(&ws.grad) {
                    *s = -g * ws.dt;
                }
            }
            let slope: f64 = ws.step.iter().zip(&ws.grad).map(|(s, g)| s * g).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                ws.trial.copy_from_slice(&q);
                for j in 0..segs - 1 {
                    for i in 0..n {
                        ws.trial[(j + 1) * n + i] += alpha * ws.step[j * n + i];
                    }
                }
                let trial = std::mem::take(&mut ws.trial);
                let v = ws.value(self.sys, &trial)?;
                ws.trial = trial;
                if v <= value + 1e-4 * alpha * slope || (v - value).abs() <= 4.0 * f64::EPSILON * value.abs().max(1.0) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            let step_max = ws.step.iter().fold(0.0f64, |a, s| a.max(s.abs())) * alpha;
            if !accepted {
                break;
            }
            std::mem::swap(&mut q, &mut ws.trial);
            value = ws.assemble(self.sys, &q)?;
            if step_max <= 1e-15 * (1.0 + q.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
                let gnorm = ws.grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                converged = gnorm <= self.opts.grad_tol.max(1e-9);
                break;
            }
        }
        let lift = (0..n).map(|i| (target[i] - x[i]).round() as i32).collect();
        Ok(ActionResult { value, curve: q, lift, iterations, converged })
    }

    /// `A^t(x, y)` over winding lifts of `y`, pruned by the Jensen bound.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<ActionResult, WeakKamError> {
        self.evaluate_warm(x, y, None)
    }

    /// As [`Self::evaluate`], with a previous minimizer used to warm-start its own lift.
    pub fn evaluate_warm(&self, x: &[f64], y: &[f64], warm: Option<&ActionResult>) -> Result<ActionResult, WeakKamError> {
        let n = self.sys.dim();
        let mut best: Option<ActionResult> = None;
        let mut fallback: Option<ActionResult> = None;
        for (bound, m) in self.lifts(x, y) {
            if let Some(b) = &best {
                if bound >= b.value {
                    break;
                }
            }
            let target: Vec<f64> = y.iter().zip(&m).map(|(v, k)| v + *k as f64).collect();
            let init = warm.filter(|w| {
                let end = &w.curve[w.curve.len() - n..];
                (0..n).all(|i| (end[i] - target[i]).abs() < 0.25)
            });
            let shifted;
            let init_curve = match init {
                Some(w) => {
                    // shift the previous curve linearly onto the new endpoints
                    let segs = self.opts.segments;
                    let mut c = w.curve.clone();
                    for k in 0..=segs {
                        let s = k as f64 / segs as f64;
                        for i in 0..n {
                            c[k * n + i] += (1.0 - s) * (x[i] - w.curve[i]) + s * (target[i] - w.curve[segs * n + i]);
                        }
                    }
                    shifted = c;
                    Some(shifted.as_slice())
                }
                None => None,
            };
            let mut r = self.to_lift(x, &target, init_curve)?;
            r.lift = m;
            let slot = if r.converged { &mut best } else { &mut fallback };
            if slot.as_ref().is_none_or(|b| r.value < b.value) {
                *slot = Some(r);
            }
        }
        match best {
            Some(b) => Ok(b),
            None => {
                let f = fallback.expect("at least one lift is tried");
                Err(WeakKamError::NonConvergence { what: "action minimization".into(), residual: f.value })
            }
        }
    }

    /// `(∂A/∂x, ∂A/∂y)` at a converged discrete minimizer.
    pub fn endpoint_gradients(&self, r: &ActionResult) -> Result<(DVector<f64>, DVector<f64>), WeakKamError> {
        let n = self.sys.dim();
        let segs = self.opts.segments;
        let dt = self.t / segs as f64;
        let seg = |k: usize| -> Result<LagDerivs, WeakKamError> {
            let q = &r.curve;
            let mut mid = [0.0; 2];
            let mut vel = [0.0; 2];
            for i in 0..n {
                mid[i] = 0.5 * (q[k * n + i] + q[(k + 1) * n + i]);
                vel[i] = (q[(k + 1) * n + i] - q[k * n + i]) / dt;
            }
            let mut jet = LagDerivs::default();
            self.sys.lagrangian_into(&mid[..n], &vel[..n], &mut jet)?;
            Ok(jet)
        };
        let (first, last) = (seg(0)?, seg(segs - 1)?);
        let gx = DVector::from_fn(n, |i, _| 0.5 * dt * first.lx[i] - first.lv[i]);
        let gy = DVector::from_fn(n, |i, _| 0.5 * dt * last.lx[i] + last.lv[i]);
        Ok((gx, gy))
    }
}

/// `A^t(x, y)` with its discrete minimizer.
pub fn action(sys: &TonelliSystem, x: &DVector<f64>, y: &DVector<f64>, t: f64, opts: ActionOptions) -> Result<ActionResult, WeakKamError> {
    if x.len() != sys.dim() || y.len() != sys.dim() {
        return Err(WeakKamError::InvalidArgument("endpoint dimension does not match the system".into()));
    }
    ActionContext::new(sys, t, opts)?.evaluate(x.as_slice(), y.as_slice())
}
