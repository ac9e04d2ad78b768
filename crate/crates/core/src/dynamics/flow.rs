use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::integrator::{Dopri5, StepStats};
use super::system::Derivs;
use super::{DynamicsError, TonelliSystem};
use crate::cones::SymMatrix;

/// A point of `𝕋ⁿ × ℝⁿ`; `x` is reduced to `[0, 1)ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(x: DVector<f64>, p: DVector<f64>) -> Self {
        Self { x: x.map(|v| v.rem_euclid(1.0)).map(|v| if v >= 1.0 { 0.0 } else { v }), p }
    }

    pub fn from_slices(x: &[f64], p: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(x), DVector::from_column_slice(p))
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub integrator: Dopri5,
    /// `BlowUp` once `‖p‖` exceeds this.
    pub p_bound: f64,
    /// Interval between frame re-orthonormalizations.
    pub renormalize_every: f64,
    /// Pull the base point back to its initial energy level at every
    /// renormalization in transports; `flow` never projects.
    pub energy_projection: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { integrator: Dopri5::default(), p_bound: 1e6, renormalize_every: 0.5, energy_projection: true }
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub end: PhasePoint,
    /// Endpoint before reduction mod 1.
    pub lifted_x: DVector<f64>,
    pub energy_drift: f64,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSample {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub h: f64,
}

fn split(y: &[f64], n: usize) -> (DVector<f64>, DVector<f64>) {
    (DVector::from_column_slice(&y[..n]), DVector::from_column_slice(&y[n..2 * n]))
}

fn hamilton_rhs(sys: &TonelliSystem, y: &[f64], d: &mut [f64]) {
    let n = sys.dim();
    let mut h = Derivs::default();
    sys.derivs_into(&y[..n], &y[n..2 * n], &mut h);
    for i in 0..n {
        d[i] = h.hp[i];
        d[n + i] = -h.hx[i];
    }
}

fn check_bound(t: f64, y: &[f64], n: usize, bound: f64) -> Result<(), DynamicsError> {
    let norm = y[n..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm <= bound) {
        return Err(DynamicsError::BlowUp { time: t, norm });
    }
    Ok(())
}

/// Hamiltonian flow `φ_t(z)` for signed `t`; `x` is integrated on the lift.
pub fn flow_lifted(sys: &TonelliSystem, x: &DVector<f64>, p: &DVector<f64>, t: f64, opts: &FlowOptions) -> Result<FlowResult, DynamicsError> {
    let n = sys.dim();
    let mut y0 = x.as_slice().to_vec();
    y0.extend_from_slice(p.as_slice());
    let (y, stats) = opts.integrator.integrate(
        |y, d| hamilton_rhs(sys, y, d),
        &y0,
        t,
        |tau, y| check_bound(tau, y, n, opts.p_bound),
    )?;
    let (xe, pe) = split(&y, n);
    let energy_drift = (sys.hamiltonian(&xe, &pe) - sys.hamiltonian(x, p)).abs();
    Ok(FlowResult { end: PhasePoint::new(xe.clone(), pe), lifted_x: xe, energy_drift, stats })
}

pub fn flow(sys: &TonelliSystem, z: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<FlowResult, DynamicsError> {
    flow_lifted(sys, &z.x, &z.p, t, opts)
}

/// Newton steps along `∇H` back to the level `H = energy`.
fn project_to_level(sys: &TonelliSystem, x: &mut DVector<f64>, p: &mut DVector<f64>, energy: f64) {
    for _ in 0..3 {
        let (hx, hp) = sys.gradient(x, p);
        let g2 = hx.norm_squared() + hp.norm_squared();
        let r = sys.hamiltonian(x, p) - energy;
        if g2 < 1e-20 || r == 0.0 {
            return;
        }
        let s = r / g2;
        *x -= &hx * s;
        *p -= &hp * s;
    }
}

/// Flow in chunks of `opts.renormalize_every`, projecting onto the initial
/// energy level between chunks when `opts.energy_projection` is set.
pub(crate) fn flow_projected(sys: &TonelliSystem, z: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<FlowResult, DynamicsError> {
    if !opts.energy_projection {
        return flow(sys, z, t, opts);
    }
    let energy = sys.hamiltonian(&z.x, &z.p);
    let chunks = (t.abs() / opts.renormalize_every).ceil().max(1.0) as usize;
    let dt = t / chunks as f64;
    let (mut x, mut p) = (z.x.clone(), z.p.clone());
    let mut stats = StepStats::default();
    for _ in 0..chunks {
        let r = flow_lifted(sys, &x, &p, dt, opts)?;
        stats.accepted += r.stats.accepted;
        stats.rejected += r.stats.rejected;
        x = r.lifted_x;
        p = r.end.p;
        project_to_level(sys, &mut x, &mut p, energy);
    }
    let energy_drift = (sys.hamiltonian(&x, &p) - energy).abs();
    Ok(FlowResult { end: PhasePoint::new(x.clone(), p), lifted_x: x, energy_drift, stats })
}

/// Orbit of a one-dimensional system sampled every `dt` (plus the endpoint).
pub fn flow_orbit(sys: &TonelliSystem, z: &PhasePoint, t: f64, dt: f64, opts: &FlowOptions) -> Result<Vec<OrbitSample>, DynamicsError> {
    if sys.dim() != 1 || !(dt > 0.0) {
        return Err(DynamicsError::InvalidArgument("orbit export needs n = 1 and dt > 0".into()));
    }
    let sample = |t: f64, x: f64, p: f64| OrbitSample {
        t,
        x,
        p,
        h: sys.hamiltonian(&DVector::from_vec(vec![x]), &DVector::from_vec(vec![p])),
    };
    let mut out = vec![sample(0.0, z.x[0], z.p[0])];
    let steps = (t.abs() / dt).ceil() as usize;
    let (mut x, mut p) = (z.x.clone(), z.p.clone());
    for k in 1..=steps {
        let tk = (k as f64 * dt).min(t.abs()) * t.signum();
        let prev = ((k - 1) as f64 * dt) * t.signum();
        let r = flow_lifted(sys, &x, &p, tk - prev, opts)?;
        x = r.lifted_x;
        p = r.end.p;
        out.push(sample(tk, x[0], p[0]));
    }
    Ok(out)
}

/// A Lagrangian subspace spanned by the columns of `[X; Y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

/// Graph extraction fails once `1/σ_min(X)` of the orthonormal frame exceeds this.
pub const CONJUGATE_KAPPA: f64 = 1e10;

impl LagrangianFrame {
    pub fn vertical(n: usize) -> Self {
        Self { x: DMatrix::zeros(n, n), y: DMatrix::identity(n, n) }
    }

    pub fn graph_of(s: &SymMatrix) -> Self {
        let n = s.dim();
        Self { x: DMatrix::identity(n, n), y: s.matrix().clone() }
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// `‖XᵀY − YᵀX‖_max`.
    pub fn lagrangian_defect(&self) -> f64 {
        let w = self.x.transpose() * &self.y - self.y.transpose() * &self.x;
        w.amax()
    }

    fn stacked(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(2 * n, n);
        m.rows_mut(0, n).copy_from(&self.x);
        m.rows_mut(n, n).copy_from(&self.y);
        m
    }

    /// Replace the frame by the `Q` factor of `[X; Y]`; the span is unchanged.
    pub fn orthonormalized(&self) -> Self {
        let n = self.dim();
        let q = self.stacked().qr().q();
        Self { x: q.rows(0, n).into_owned(), y: q.rows(n, n).into_owned() }
    }

    /// `1/σ_min(X)` of the orthonormalized frame; `≥ 1`, infinite for a vertical-meeting frame.
    pub fn kappa(&self) -> f64 {
        let f = self.orthonormalized();
        let smin = f.x.singular_values().min();
        if smin > 0.0 {
            1.0 / smin
        } else {
            f64::INFINITY
        }
    }

    /// `sym(Y X⁻¹)`, or `ConjugatePoint` when `X` is numerically singular.
    pub fn graph(&self, time: f64) -> Result<SymMatrix, DynamicsError> {
        let f = self.orthonormalized();
        let kappa = f.kappa();
        if !(kappa <= CONJUGATE_KAPPA) {
            return Err(DynamicsError::ConjugatePoint { time, kappa });
        }
        // G = Y X⁻¹  ⇔  Xᵀ G = Yᵀ
        let g = f.x.transpose().lu().solve(&f.y.transpose()).ok_or(DynamicsError::ConjugatePoint { time, kappa })?;
        Ok(SymMatrix::new(g).expect("square"))
    }

    /// Distance between spans: `‖P₁ − P₂‖₂` of the orthogonal projectors.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.orthonormalized().stacked();
        let b = other.orthonormalized().stacked();
        let d = &a * a.transpose() - &b * b.transpose();
        d.singular_values().max()
    }
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub frame: LagrangianFrame,
    pub end: PhasePoint,
    pub lifted_x: DVector<f64>,
    pub max_lagrangian_defect: f64,
    pub stats: StepStats,
}

/// Base flow plus `ξ' = H_pp η`, `η' = −H_xx ξ` (`H_xp = 0` for `K(p + c) + V(x)`).
fn variational_rhs(sys: &TonelliSystem, y: &[f64], d: &mut [f64]) {
    let n = sys.dim();
    let mut h = Derivs::default();
    sys.derivs_into(&y[..n], &y[n..2 * n], &mut h);
    for i in 0..n {
        d[i] = h.hp[i];
        d[n + i] = -h.hx[i];
    }
    let (xi, eta) = y[2 * n..].split_at(n * n);
    let (dxi, deta) = d[2 * n..].split_at_mut(n * n);
    // column-major n×n blocks
    for col in 0..n {
        for row in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += h.hpp[row][k] * eta[col * n + k];
            }
            dxi[col * n + row] = acc;
            deta[col * n + row] = -h.hxx[row] * xi[col * n + row];
        }
    }
}

/// Transport `frame` at `(x, p)` by `Dφ_t`, re-orthonormalizing every
/// `opts.renormalize_every` time units.
pub fn transport_lifted(
    sys: &TonelliSystem,
    x: &DVector<f64>,
    p: &DVector<f64>,
    t: f64,
    frame: &LagrangianFrame,
    opts: &FlowOptions,
) -> Result<TransportResult, DynamicsError> {
    let n = sys.dim();
    if frame.dim() != n || x.len() != n || p.len() != n {
        return Err(DynamicsError::InvalidArgument("frame and phase point dimensions differ".into()));
    }
    let mut f = frame.orthonormalized();
    let (mut xc, mut pc) = (x.clone(), p.clone());
    let mut stats = StepStats::default();
    let mut defect = f.lagrangian_defect();
    let energy = sys.hamiltonian(x, p);
    let chunks = (t.abs() / opts.renormalize_every).ceil().max(1.0) as usize;
    let dt = t / chunks as f64;
    for c in 0..chunks {
        let mut y0 = xc.as_slice().to_vec();
        y0.extend_from_slice(pc.as_slice());
        y0.extend_from_slice(f.x.as_slice());
        y0.extend_from_slice(f.y.as_slice());
        let offset = c as f64 * dt;
        let (y, s) = opts.integrator.integrate(
            |y, d| variational_rhs(sys, y, d),
            &y0,
            dt,
            |tau, y| check_bound(offset + tau, y, n, opts.p_bound),
        )?;
        stats.accepted += s.accepted;
        stats.rejected += s.rejected;
        let (xe, pe) = split(&y, n);
        xc = xe;
        pc = pe;
        if opts.energy_projection {
            project_to_level(sys, &mut xc, &mut pc, energy);
        }
        let raw = LagrangianFrame {
            x: DMatrix::from_column_slice(n, n, &y[2 * n..2 * n + n * n]),
            y: DMatrix::from_column_slice(n, n, &y[2 * n + n * n..]),
        };
        f = raw.orthonormalized();
        defect = defect.max(f.lagrangian_defect());
    }
    Ok(TransportResult { frame: f, end: PhasePoint::new(xc.clone(), pc), lifted_x: xc, max_lagrangian_defect: defect, stats })
}

pub fn variational_transport(
    sys: &TonelliSystem,
    z: &PhasePoint,
    t: f64,
    frame: &LagrangianFrame,
    opts: &FlowOptions,
) -> Result<TransportResult, DynamicsError> {
    transport_lifted(sys, &z.x, &z.p, t, frame, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn equilibrium_is_fixed() {
        let sys = TonelliSystem::pendulum(0.0);
        let z = PhasePoint::from_slices(&[0.0], &[0.0]);
        let r = flow(&sys, &z, 10.0, &FlowOptions::default()).unwrap();
        assert!(r.lifted_x[0].abs() < 1e-9 && r.end.p[0].abs() < 1e-9);
    }

    #[test]
    fn reduction_mod_one() {
        let z = PhasePoint::from_slices(&[-0.25, 1.5], &[0.0, 0.0]);
        assert_eq!(z.x.as_slice(), &[0.75, 0.5]);
        assert_eq!(PhasePoint::from_slices(&[-1e-18], &[0.0]).x[0], 0.0);
    }

    #[test]
    fn saddle_vertical_closed_form() {
        let sys = TonelliSystem::pendulum(0.0);
        let z = PhasePoint::from_slices(&[0.0], &[0.0]);
        let lam = 2.0 * PI;
        for t in [0.3, 1.0, 2.5] {
            let r = variational_transport(&sys, &z, t, &LagrangianFrame::vertical(1), &FlowOptions::default()).unwrap();
            let exact = LagrangianFrame {
                x: DMatrix::from_element(1, 1, (lam * t).sinh() / lam),
                y: DMatrix::from_element(1, 1, (lam * t).cosh()),
            };
            assert!(r.frame.distance(&exact) < 1e-7);
        }
    }

    #[test]
    fn lagrangian_defect_stays_small() {
        let sys = TonelliSystem::product([0.3, -0.2]);
        let z = PhasePoint::from_slices(&[0.1, 0.4], &[1.0, 0.5]);
        let frame = LagrangianFrame::graph_of(&SymMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, -0.5]));
        let r = variational_transport(&sys, &z, 50.0, &frame, &FlowOptions::default()).unwrap();
        assert!(r.max_lagrangian_defect < 1e-7, "{}", r.max_lagrangian_defect);
    }

    #[test]
    fn orthonormalization_keeps_span() {
        let f = LagrangianFrame { x: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 3.0]), y: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]) };
        assert!(f.distance(&f.orthonormalized()) < 1e-14);
        let g1 = f.graph(0.0).unwrap();
        let g2 = f.orthonormalized().graph(0.0).unwrap();
        assert!((g1.matrix() - g2.matrix()).amax() < 1e-12);
    }

    #[test]
    fn vertical_has_no_graph() {
        assert!(matches!(LagrangianFrame::vertical(2).graph(0.0), Err(DynamicsError::ConjugatePoint { .. })));
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = TonelliSystem::pendulum(0.0);
        let opts = FlowOptions { p_bound: 1.0, ..Default::default() };
        let z = PhasePoint::from_slices(&[0.25], &[0.9]);
        assert!(matches!(flow(&sys, &z, 5.0, &opts), Err(DynamicsError::BlowUp { .. })));
    }
}
