use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// One term `amp · cos(2π k x_axis)` of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub axis: usize,
    pub k: u32,
    pub amp: f64,
}

/// Kinetic part as a function of the shifted momentum `q = p + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kinetic {
    /// `½|q|²`
    Quadratic,
    /// `½|q|² + (a/4)|q|⁴`, `a ≥ 0`
    Quartic { a: f64 },
}

/// `H(x, p) = K(p + c) + V(x)` on `𝕋ⁿ × ℝⁿ`, `n ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonelliSystem {
    pub name: String,
    n: usize,
    kinetic: Kinetic,
    potential: Vec<PotentialTerm>,
    shift: Vec<f64>,
}

/// Second derivatives of `H` at a phase point.
#[derive(Debug, Clone)]
pub struct HamiltonianHessian {
    pub xx: DMatrix<f64>,
    /// `∂²H/∂x_i∂p_j`
    pub xp: DMatrix<f64>,
    pub pp: DMatrix<f64>,
}

/// `L` and its derivatives at `(x, v)`.
#[derive(Debug, Clone)]
pub struct LagrangianJet {
    pub value: f64,
    pub lx: DVector<f64>,
    pub lv: DVector<f64>,
    pub lxx: DMatrix<f64>,
    /// `∂²L/∂x_i∂v_j`
    pub lxv: DMatrix<f64>,
    pub lvv: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Derivs {
    pub hx: [f64; 2],
    pub hp: [f64; 2],
    pub hxx: [f64; 2],
    pub hpp: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LagDerivs {
    pub value: f64,
    pub lx: [f64; 2],
    pub lv: [f64; 2],
    pub lxx: [f64; 2],
    pub lvv: [[f64; 2]; 2],
}

const LEGENDRE_TOL: f64 = 1e-12;

impl TonelliSystem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        kinetic: Kinetic,
        potential: Vec<PotentialTerm>,
        shift: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        if !(1..=2).contains(&n) {
            return Err(DynamicsError::InvalidSystem(format!("dimension {n} not in {{1, 2}}")));
        }
        if shift.len() != n {
            return Err(DynamicsError::InvalidSystem(format!("shift has length {}, expected {n}", shift.len())));
        }
        if let Kinetic::Quartic { a } = kinetic {
            if !(a >= 0.0) {
                return Err(DynamicsError::NotConvex { min_eigenvalue: a });
            }
        }
        for t in &potential {
            if t.axis >= n || !t.amp.is_finite() {
                return Err(DynamicsError::InvalidSystem(format!("bad potential term {t:?}")));
            }
        }
        if shift.iter().any(|c| !c.is_finite()) {
            return Err(DynamicsError::InvalidSystem("non-finite shift".into()));
        }
        Ok(Self { name: name.into(), n, kinetic, potential, shift })
    }

    /// `H = ½p² + cos 2πx`.
    pub fn pendulum(shift: f64) -> Self {
        Self::new("pendulum", 1, Kinetic::Quadratic, vec![PotentialTerm { axis: 0, k: 1, amp: 1.0 }], vec![shift])
            .expect("valid")
    }

    /// `H = ½p² + cos 2πx + 0.3 cos 4πx`.
    pub fn two_site(shift: f64) -> Self {
        Self::new(
            "two-site",
            1,
            Kinetic::Quadratic,
            vec![PotentialTerm { axis: 0, k: 1, amp: 1.0 }, PotentialTerm { axis: 0, k: 2, amp: 0.3 }],
            vec![shift],
        )
        .expect("valid")
    }

    /// `H = ½|p|²`.
    pub fn free(n: usize, shift: Vec<f64>) -> Result<Self, DynamicsError> {
        Self::new("free", n, Kinetic::Quadratic, vec![], shift)
    }

    /// `H = ½|p|² + cos 2πx₁ + ½ cos 2πx₂`.
    pub fn product(shift: [f64; 2]) -> Self {
        Self::new(
            "product",
            2,
            Kinetic::Quadratic,
            vec![PotentialTerm { axis: 0, k: 1, amp: 1.0 }, PotentialTerm { axis: 1, k: 1, amp: 0.5 }],
            shift.to_vec(),
        )
        .expect("valid")
    }

    /// `H = ½p² + (a/4)p⁴ + cos 2πx`; its Lagrangian has no closed form.
    pub fn quartic(a: f64, shift: f64) -> Result<Self, DynamicsError> {
        Self::new(
            "quartic",
            1,
            Kinetic::Quartic { a },
            vec![PotentialTerm { axis: 0, k: 1, amp: 1.0 }],
            vec![shift],
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn shift(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.shift)
    }

    pub fn kinetic(&self) -> Kinetic {
        self.kinetic
    }

    pub fn potential_terms(&self) -> &[PotentialTerm] {
        &self.potential
    }

    pub fn is_mechanical(&self) -> bool {
        matches!(self.kinetic, Kinetic::Quadratic)
    }

    pub fn potential(&self, x: &DVector<f64>) -> f64 {
        self.potential.iter().map(|t| t.amp * (2.0 * PI * t.k as f64 * x[t.axis]).cos()).sum()
    }

    pub fn potential_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for t in &self.potential {
            let w = 2.0 * PI * t.k as f64;
            g[t.axis] -= t.amp * w * (w * x[t.axis]).sin();
        }
        g
    }

    pub fn potential_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for t in &self.potential {
            let w = 2.0 * PI * t.k as f64;
            h[(t.axis, t.axis)] -= t.amp * w * w * (w * x[t.axis]).cos();
        }
        h
    }

    /// `max V`, sampled on a fine grid and polished; for cosine sums with a
    /// common maximum at the origin this is exact.
    pub fn max_potential(&self) -> f64 {
        let m = 2048;
        let mut best = f64::NEG_INFINITY;
        let grid = |i: usize| i as f64 / m as f64;
        if self.n == 1 {
            for i in 0..m {
                best = best.max(self.potential(&DVector::from_vec(vec![grid(i)])));
            }
        } else {
            // axis-separable terms: maximize each axis independently
            for axis in 0..self.n {
                let mut axis_best = f64::NEG_INFINITY;
                for i in 0..m {
                    let v: f64 = self
                        .potential
                        .iter()
                        .filter(|t| t.axis == axis)
                        .map(|t| t.amp * (2.0 * PI * t.k as f64 * grid(i)).cos())
                        .sum();
                    axis_best = axis_best.max(v);
                }
                best = if axis == 0 { axis_best } else { best + axis_best };
            }
        }
        best
    }

    /// Allocation-free `(H_x, H_p, diag H_xx, H_pp)` for the hot loops;
    /// `H_xx` is diagonal because every potential term depends on one axis.
    pub(crate) fn derivs_into(&self, x: &[f64], p: &[f64], out: &mut Derivs) {
        let n = self.n;
        out.hx = [0.0; 2];
        out.hxx = [0.0; 2];
        for t in &self.potential {
            let w = 2.0 * PI * t.k as f64;
            let (s, c) = (w * x[t.axis]).sin_cos();
            out.hx[t.axis] -= t.amp * w * s;
            out.hxx[t.axis] -= t.amp * w * w * c;
        }
        let mut q = [0.0; 2];
        for i in 0..n {
            q[i] = p[i] + self.shift[i];
        }
        match self.kinetic {
            Kinetic::Quadratic => {
                out.hp = q;
                out.hpp = [[1.0, 0.0], [0.0, 1.0]];
            }
            Kinetic::Quartic { a } => {
                let q2 = q[0] * q[0] + q[1] * q[1];
                for i in 0..n {
                    out.hp[i] = q[i] * (1.0 + a * q2);
                    for j in 0..n {
                        out.hpp[i][j] = 2.0 * a * q[i] * q[j] + if i == j { 1.0 + a * q2 } else { 0.0 };
                    }
                }
            }
        }
    }

    /// Allocation-free Lagrangian jet. `L_xv = 0` and `L_xx` is diagonal for
    /// `K(p + c) + V(x)`, so only those parts are stored.
    pub(crate) fn lagrangian_into(&self, x: &[f64], v: &[f64], out: &mut LagDerivs) -> Result<(), DynamicsError> {
        let n = self.n;
        let mut pot = 0.0;
        out.lx = [0.0; 2];
        out.lxx = [0.0; 2];
        for t in &self.potential {
            let w = 2.0 * PI * t.k as f64;
            let (s, c) = (w * x[t.axis]).sin_cos();
            pot += t.amp * c;
            out.lx[t.axis] += t.amp * w * s;
            out.lxx[t.axis] += t.amp * w * w * c;
        }
        match self.kinetic {
            Kinetic::Quadratic => {
                let mut val = -pot;
                for i in 0..n {
                    val += 0.5 * v[i] * v[i] - self.shift[i] * v[i];
                    out.lv[i] = v[i] - self.shift[i];
                }
                out.value = val;
                out.lvv = [[1.0, 0.0], [0.0, 1.0]];
            }
            Kinetic::Quartic { a } => {
                // q ∥ v with |q| = s solving s + a s³ = |v|
                let speed = (0..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
                let mut s = speed;
                let mut converged = false;
                for _ in 0..100 {
                    let r = s + a * s * s * s - speed;
                    let step = r / (1.0 + 3.0 * a * s * s);
                    s -= step;
                    if step.abs() <= LEGENDRE_TOL * (1.0 + speed) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(DynamicsError::NonConvergence { what: "Legendre transform".into(), residual: f64::NAN });
                }
                let scale = if speed > 0.0 { s / speed } else { 1.0 };
                let mut q = [0.0; 2];
                let mut kin_dot = 0.0;
                for i in 0..n {
                    q[i] = v[i] * scale;
                    kin_dot += q[i] * v[i];
                }
                let q2 = s * s;
                let kinetic = 0.5 * q2 + 0.25 * a * q2 * q2;
                let mut val = kin_dot - kinetic - pot;
                for i in 0..n {
                    val -= self.shift[i] * v[i];
                    out.lv[i] = q[i] - self.shift[i];
                }
                out.value = val;
                // L_vv = H_pp⁻¹ with H_pp = (1 + a|q|²)I + 2a qqᵀ
                let d = 1.0 + a * q2;
                for i in 0..2 {
                    for j in 0..2 {
                        let qq = if q2 > 0.0 { q[i] * q[j] / q2 } else { 0.0 };
                        let id = if i == j { 1.0 } else { 0.0 };
                        out.lvv[i][j] = (id - qq) / d + qq / (d + 2.0 * a * q2);
                    }
                }
            }
        }
        Ok(())
    }

    fn kinetic_parts(&self, q: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let q2 = q.norm_squared();
        match self.kinetic {
            Kinetic::Quadratic => (0.5 * q2, q.clone(), DMatrix::identity(self.n, self.n)),
            Kinetic::Quartic { a } => {
                let value = 0.5 * q2 + 0.25 * a * q2 * q2;
                let grad = q * (1.0 + a * q2);
                let hess = DMatrix::identity(self.n, self.n) * (1.0 + a * q2) + q * q.transpose() * (2.0 * a);
                (value, grad, hess)
            }
        }
    }

    pub fn hamiltonian(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let q = p + self.shift();
        self.kinetic_parts(&q).0 + self.potential(x)
    }

    /// `(H_x, H_p)`.
    pub fn gradient(&self, x: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let q = p + self.shift();
        (self.potential_gradient(x), self.kinetic_parts(&q).1)
    }

    pub fn hessian(&self, x: &DVector<f64>, p: &DVector<f64>) -> HamiltonianHessian {
        let q = p + self.shift();
        HamiltonianHessian {
            xx: self.potential_hessian(x),
            xp: DMatrix::zeros(self.n, self.n),
            pp: self.kinetic_parts(&q).2,
        }
    }

    /// Solve `H_p(x, p) = v` by Newton from `p₀ = v − c`.
    fn momentum_of(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>, DynamicsError> {
        let mut p = v - self.shift();
        if self.is_mechanical() {
            return Ok(p);
        }
        for _ in 0..100 {
            let (_, hp) = self.gradient(x, &p);
            let r = &hp - v;
            if r.norm() <= LEGENDRE_TOL * (1.0 + v.norm()) {
                return Ok(p);
            }
            let hpp = self.hessian(x, &p).pp;
            p -= hpp.cholesky().ok_or(DynamicsError::NotConvex { min_eigenvalue: f64::NAN })?.solve(&r);
        }
        Err(DynamicsError::NonConvergence { what: "Legendre transform".into(), residual: f64::NAN })
    }

    /// `(L(x, v), p = L_v(x, v))`.
    pub fn legendre(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<(f64, DVector<f64>), DynamicsError> {
        if self.is_mechanical() {
            let c = self.shift();
            return Ok((0.5 * v.norm_squared() - c.dot(v) - self.potential(x), v - c));
        }
        let p = self.momentum_of(x, v)?;
        Ok((p.dot(v) - self.hamiltonian(x, &p), p))
    }

    /// `L` with first and second derivatives.
    pub fn lagrangian_jet(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<LagrangianJet, DynamicsError> {
        let (value, p) = self.legendre(x, v)?;
        let h = self.hessian(x, &p);
        let (hx, _) = self.gradient(x, &p);
        if self.is_mechanical() {
            return Ok(LagrangianJet {
                value,
                lx: -hx,
                lv: p,
                lxx: -h.xx,
                lxv: DMatrix::zeros(self.n, self.n),
                lvv: DMatrix::identity(self.n, self.n),
            });
        }
        let chol = h.pp.clone().cholesky().ok_or(DynamicsError::NotConvex { min_eigenvalue: f64::NAN })?;
        let lvv = chol.inverse();
        // ∂p/∂x = −H_pp⁻¹ H_px
        let dp_dx = -(&lvv * h.xp.transpose());
        let lxx = -&h.xx - &h.xp * &dp_dx;
        let lxv = -(&h.xp * &lvv);
        Ok(LagrangianJet { value, lx: -hx, lv: p, lxx, lxv, lvv })
    }

    /// Minimum eigenvalue of `H_pp`; must be positive everywhere.
    pub fn convexity_at(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.hessian(x, p).pp.symmetric_eigenvalues().min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn periodic_in_x() {
        for sys in [TonelliSystem::pendulum(0.3), TonelliSystem::two_site(0.0)] {
            for &x in &[0.1, 0.37, 0.8] {
                let p = v(&[0.4]);
                assert!((sys.hamiltonian(&v(&[x]), &p) - sys.hamiltonian(&v(&[x + 1.0]), &p)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pendulum_lagrangian() {
        let sys = TonelliSystem::pendulum(0.0);
        let (l, p) = sys.legendre(&v(&[0.2]), &v(&[0.7])).unwrap();
        assert!((l - (0.5 * 0.49 - (2.0 * PI * 0.2).cos())).abs() < 1e-15);
        assert_eq!(p[0], 0.7);
    }

    #[test]
    fn free_self_dual() {
        let sys = TonelliSystem::free(2, vec![0.0, 0.0]).unwrap();
        let (l, _) = sys.legendre(&v(&[0.3, 0.1]), &v(&[1.0, -2.0])).unwrap();
        assert!((l - 2.5).abs() < 1e-15);
    }

    #[test]
    fn legendre_involution() {
        for sys in [TonelliSystem::quartic(0.7, 0.4).unwrap(), TonelliSystem::pendulum(1.3), TonelliSystem::product([0.2, -1.0])] {
            let n = sys.dim();
            for i in 0..20 {
                let x = DVector::from_fn(n, |j, _| 0.13 * (i + j) as f64);
                let vel = DVector::from_fn(n, |j, _| -3.0 + 0.31 * (i * 3 + j) as f64);
                let (l, p) = sys.legendre(&x, &vel).unwrap();
                let res = sys.hamiltonian(&x, &p) + l - vel.dot(&p);
                assert!(res.abs() < 1e-8 * (1.0 + l.abs()), "{res}");
            }
        }
    }

    #[test]
    fn quartic_jet_matches_differences() {
        let sys = TonelliSystem::quartic(0.5, 0.2).unwrap();
        let (x, vel) = (v(&[0.21]), v(&[1.3]));
        let jet = sys.lagrangian_jet(&x, &vel).unwrap();
        let h = 1e-5;
        let lv = |w: f64| sys.legendre(&x, &v(&[w])).unwrap().0;
        let fd = (lv(1.3 + h) - lv(1.3 - h)) / (2.0 * h);
        assert!((fd - jet.lv[0]).abs() < 1e-7);
        let fd2 = (lv(1.3 + h) - 2.0 * lv(1.3) + lv(1.3 - h)) / (h * h);
        assert!((fd2 - jet.lvv[(0, 0)]).abs() < 1e-4);
    }

    #[test]
    fn fast_jet_agrees() {
        for sys in [TonelliSystem::quartic(0.7, 0.4).unwrap(), TonelliSystem::product([0.2, -1.0])] {
            let n = sys.dim();
            let x = DVector::from_fn(n, |j, _| 0.17 + 0.2 * j as f64);
            let vel = DVector::from_fn(n, |j, _| 0.9 - 1.7 * j as f64);
            let slow = sys.lagrangian_jet(&x, &vel).unwrap();
            let mut fast = LagDerivs::default();
            sys.lagrangian_into(x.as_slice(), vel.as_slice(), &mut fast).unwrap();
            assert!((slow.value - fast.value).abs() < 1e-12);
            for i in 0..n {
                assert!((slow.lx[i] - fast.lx[i]).abs() < 1e-12);
                assert!((slow.lv[i] - fast.lv[i]).abs() < 1e-12);
                assert!((slow.lxx[(i, i)] - fast.lxx[i]).abs() < 1e-10);
                for j in 0..n {
                    assert!((slow.lvv[(i, j)] - fast.lvv[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_negative_quartic() {
        assert!(matches!(TonelliSystem::quartic(-1.0, 0.0), Err(DynamicsError::NotConvex { .. })));
    }

    #[test]
    fn critical_value_of_pendulum() {
        assert!((TonelliSystem::pendulum(0.0).max_potential() - 1.0).abs() < 1e-15);
        assert!((TonelliSystem::product([0.0, 0.0]).max_potential() - 1.5).abs() < 1e-15);
    }
}
