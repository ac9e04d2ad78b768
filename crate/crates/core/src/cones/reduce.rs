use nalgebra::{DMatrix, DVector};

use super::{cone_witness, sg_value, ConeError, ConePair, SgValue, SymMatrix, TangentVector};
use crate::linalg;

/// Off-diagonal block defect tolerated after block-diagonalization.
const BLOCK_TOL: f64 = 1e-9;
/// The kernel block `N` is used unsheared only when its smallest absolute
/// eigenvalue is at least this fraction of `max(‖S₁‖, ‖S₂‖)`.
const N_CONDITIONING: f64 = 0.5;

/// A pair brought to the block form `diag(S̄ᵢ, N)` by a shear `S ↦ S + CI`
/// followed by the change of base `Φ_A`, `A = PᵀQ`: `P` is orthogonal and
/// sends `ker(S₂ − S₁)` to the last `n − m` coordinates, `Q` eliminates the
/// coupling block through the Schur complement of `N`.
#[derive(Debug, Clone)]
pub struct ReducedPair {
    pub a: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
    pub shear: f64,
    pub m: usize,
    pub sbar1: SymMatrix,
    pub sbar2: SymMatrix,
    pub n_block: SymMatrix,
    reduced: Option<ConePair>,
}

/// Reduce `C(S₁, S₂)` to a transversal pair of size `m = rank(S₂ − S₁)`
/// plus a common block `N` on the kernel.
pub fn reduce_degenerate(pair: &ConePair) -> Result<ReducedPair, ConeError> {
    let n = pair.dim();
    if pair.is_transversal() {
        return Ok(ReducedPair {
            a: DMatrix::identity(n, n),
            a_inv: DMatrix::identity(n, n),
            shear: 0.0,
            m: n,
            sbar1: pair.s1().clone(),
            sbar2: pair.s2().clone(),
            n_block: SymMatrix::zeros(0),
            reduced: Some(pair.clone()),
        });
    }
    let m = pair.rank();
    let k = n - m;
    // columns of V: range directions first, then kernel; P = Vᵀ
    let mut v = DMatrix::zeros(n, n);
    v.columns_mut(0, m).copy_from(&pair.range_basis());
    v.columns_mut(m, k).copy_from(&pair.kernel_basis());

    let kernel = pair.kernel_basis();
    let raw_n = pair.s1().congruence(&kernel);
    let (n_vals, _) = raw_n.eigen();
    let smallest = n_vals.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    let scale = pair.s1().norm2().max(pair.s2().norm2());
    let shear = if smallest > 0.0 && smallest >= N_CONDITIONING * scale {
        0.0
    } else {
        pair.s1().norm2() + pair.s2().norm2() + 1.0
    };

    let s1 = pair.s1().shifted(shear);
    let s2 = pair.s2().shifted(shear);
    let b1 = s1.congruence(&v).into_matrix();
    let b2 = s2.congruence(&v).into_matrix();
    let mblk = b1.view((0, m), (m, k)).into_owned();
    let nblk = b1.view((m, m), (k, k)).into_owned();
    let n_inv = nblk.clone().try_inverse().ok_or(ConeError::SingularMatrix { condition: f64::INFINITY })?;
    let coupling = &n_inv * mblk.transpose();

    let mut q = DMatrix::identity(n, n);
    q.view_mut((m, 0), (k, m)).copy_from(&(-&coupling));
    let mut q_inv = DMatrix::identity(n, n);
    q_inv.view_mut((m, 0), (k, m)).copy_from(&coupling);

    let r1 = q.transpose() * &b1 * &q;
    let r2 = q.transpose() * &b2 * &q;
    let tol = BLOCK_TOL * (1.0 + s1.norm2().max(s2.norm2()));
    let defect = [&r1, &r2]
        .iter()
        .map(|r| {
            let off = linalg::max_abs(&r.view((0, m), (m, k)).into_owned());
            let nd = linalg::max_abs(&(r.view((m, m), (k, k)).into_owned() - &nblk));
            off.max(nd)
        })
        .fold(0.0_f64, f64::max);
    if defect > tol {
        return Err(ConeError::ReductionFailed { defect });
    }

    let sbar1 = SymMatrix::new(r1.view((0, 0), (m, m)).into_owned())?;
    let sbar2 = SymMatrix::new(r2.view((0, 0), (m, m)).into_owned())?;
    let n_block = SymMatrix::new(nblk)?;
    let reduced = if m > 0 {
        let rp = ConePair::new(sbar1.clone(), sbar2.clone())?;
        if !rp.is_transversal() {
            return Err(ConeError::ReductionFailed { defect: rp.u().min_eigenvalue() });
        }
        Some(rp)
    } else {
        None
    };
    Ok(ReducedPair { a: &v * &q, a_inv: q_inv * v.transpose(), shear, m, sbar1, sbar2, n_block, reduced })
}

impl ReducedPair {
    /// `Φ_A Φ_C v`: the vector in reduced coordinates.
    pub fn to_reduced(&self, v: &TangentVector) -> TangentVector {
        let k = &v.k + &v.h * self.shear;
        TangentVector { h: &self.a_inv * &v.h, k: self.a.transpose() * k }
    }

    /// Pull a reduced-coordinate graph back: `A⁻ᵀ S A⁻¹ − CI`.
    pub fn from_reduced_graph(&self, s: &SymMatrix) -> SymMatrix {
        s.congruence(&self.a_inv).shifted(-self.shear)
    }

    /// Validated block form `QᵀP(Sᵢ + CI)PᵀQ = diag(S̄ᵢ, N)`, as full matrices.
    pub fn block_forms(&self) -> (SymMatrix, SymMatrix) {
        (self.block_diag(&self.sbar1), self.block_diag(&self.sbar2))
    }

    fn block_diag(&self, top: &SymMatrix) -> SymMatrix {
        let n = self.a.nrows();
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, 0), (self.m, self.m)).copy_from(top.matrix());
        full.view_mut((self.m, self.m), (n - self.m, n - self.m)).copy_from(self.n_block.matrix());
        SymMatrix::new(full).expect("square")
    }

    /// Split reduced coordinates into the transversal block and the common
    /// `N` block, checking that the latter lies on the graph of `N`.
    fn split(&self, v: &TangentVector) -> Option<(TangentVector, DVector<f64>)> {
        let w = self.to_reduced(v);
        let n = w.dim();
        let k = n - self.m;
        let hb = w.h.rows(self.m, k).into_owned();
        let kb = w.k.rows(self.m, k).into_owned();
        let scale = w.h.norm() * (1.0 + self.n_block.norm2()) + w.k.norm();
        if (&kb - self.n_block.apply(&hb)).norm() > 1e-8 * scale {
            return None;
        }
        let top = TangentVector { h: w.h.rows(0, self.m).into_owned(), k: w.k.rows(0, self.m).into_owned() };
        Some((top, hb))
    }

    /// The sign function computed through the reduction: the common block
    /// lies in `S₁ ∩ S₂` and contributes nothing.
    pub fn sg_value(&self, v: &TangentVector) -> Result<SgValue, ConeError> {
        match self.split(v) {
            None => Ok(SgValue::MinusInfinity),
            Some((top, _)) => match &self.reduced {
                Some(rp) => sg_value(rp, &top),
                None => Ok(SgValue::Finite(0.0)),
            },
        }
    }

    /// Witness assembled blockwise: a transversal witness `S̄` on the first
    /// block, `N` fixed on the second, pulled back to the original pair.
    pub fn witness(&self, v: &TangentVector) -> Result<SymMatrix, ConeError> {
        let (top, _) = self.split(v).ok_or(ConeError::NoWitness { sg: f64::NEG_INFINITY })?;
        let sbar = match &self.reduced {
            Some(rp) => cone_witness(rp, &top)?,
            None => SymMatrix::zeros(0),
        };
        Ok(self.from_reduced_graph(&self.block_diag(&sbar)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transversal_pair_is_untouched() {
        let pair = ConePair::new(SymMatrix::from_diagonal(&[0.0, -1.0]), SymMatrix::from_diagonal(&[1.0, 2.0])).unwrap();
        let r = reduce_degenerate(&pair).unwrap();
        assert_eq!(r.m, 2);
        assert_eq!(r.shear, 0.0);
        assert_eq!(r.a, DMatrix::identity(2, 2));
        assert_eq!(&r.sbar1, pair.s1());
    }

    #[test]
    fn already_block_diagonal() {
        let pair = ConePair::new(SymMatrix::from_diagonal(&[0.0, 1.0]), SymMatrix::from_diagonal(&[1.0, 1.0])).unwrap();
        let r = reduce_degenerate(&pair).unwrap();
        assert_eq!(r.m, 1);
        assert_eq!(r.shear, 0.0);
        assert!(r.sbar1.get(0, 0).abs() < 1e-14);
        assert!((r.sbar2.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((r.n_block.get(0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn collapsed_pair() {
        let s = SymMatrix::from_row_slice(2, &[1.0, 0.4, 0.4, -0.3]);
        let pair = ConePair::new(s.clone(), s.clone()).unwrap();
        let r = reduce_degenerate(&pair).unwrap();
        assert_eq!(r.m, 0);
        let h = DVector::from_vec(vec![0.5, -1.5]);
        let on = TangentVector::on_graph(&s, h.clone());
        assert_eq!(r.sg_value(&on).unwrap(), SgValue::Finite(0.0));
        let off = TangentVector { h, k: DVector::from_vec(vec![1.0, 1.0]) };
        assert_eq!(r.sg_value(&off).unwrap(), SgValue::MinusInfinity);
        let w = r.witness(&on).unwrap();
        assert!(linalg::max_abs(&(w.matrix() - s.matrix())) < 1e-9);
    }

    #[test]
    fn singular_kernel_block_triggers_shear() {
        // kernel e2, S1 restricted to it is 0
        let pair = ConePair::new(SymMatrix::from_diagonal(&[0.0, 0.0]), SymMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        let r = reduce_degenerate(&pair).unwrap();
        assert!(r.shear > 0.0);
        let (b1, b2) = r.block_forms();
        let back1 = r.from_reduced_graph(&b1);
        let back2 = r.from_reduced_graph(&b2);
        assert!(linalg::max_abs(&(back1.matrix() - pair.s1().matrix())) < 1e-9);
        assert!(linalg::max_abs(&(back2.matrix() - pair.s2().matrix())) < 1e-9);
    }
}
