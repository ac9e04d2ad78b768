use rayon::prelude::*;

use super::grid::GridFunction;
use super::kernel::ActionKernel;
use super::WeakKamError;

const BLOCK: usize = 256;
const LANES: usize = 8;

fn check(kernel: &ActionKernel, u: &GridFunction) -> Result<(), WeakKamError> {
    if kernel.n != u.dim() || kernel.resolution != u.resolution() {
        return Err(WeakKamError::ResolutionMismatch { kernel: kernel.resolution, grid: u.resolution() });
    }
    Ok(())
}

/// `T_t u(y_j) = min_i {u(x_i) + K[i][j]}`.
pub fn lax_oleinik(kernel: &ActionKernel, u: &GridFunction) -> Result<GridFunction, WeakKamError> {
    check(kernel, u)?;
    let m = kernel.nodes();
    let uv = u.values();
    let mut out = vec![f64::INFINITY; m];
    let k = kernel.values();
    // column blocks in parallel, rows swept in order; min is exact so the
    // result does not depend on the partition
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let j0 = b * BLOCK;
        for (i, &ui) in uv.iter().enumerate() {
            let row = &k[i * m + j0..i * m + j0 + chunk.len()];
            for (o, kij) in chunk.iter_mut().zip(row) {
                *o = o.min(ui + kij);
            }
        }
    });
    GridFunction::new(u.dim(), u.resolution(), out)
}

/// `T⁺_t u(x_i) = max_j {u(y_j) − K[i][j]}`.
pub fn lax_oleinik_forward(kernel: &ActionKernel, u: &GridFunction) -> Result<GridFunction, WeakKamError> {
    check(kernel, u)?;
    let uv = u.values();
    let out: Vec<f64> = (0..kernel.nodes())
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            let mut acc = [f64::NEG_INFINITY; LANES];
            for (uc, kc) in uv.chunks_exact(LANES).zip(row.chunks_exact(LANES)) {
                for l in 0..LANES {
                    acc[l] = acc[l].max(uc[l] - kc[l]);
                }
            }
            let tail = uv.len() - uv.len() % LANES;
            let head = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            uv[tail..].iter().zip(&row[tail..]).fold(head, |a, (uj, kij)| a.max(uj - kij))
        })
        .collect();
    GridFunction::new(u.dim(), u.resolution(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ActionKernel {
        let m = 16;
        let vals = (0..m * m).map(|k| (((k / m) as f64 - (k % m) as f64) / m as f64).powi(2) - 0.1 * ((k % 7) as f64)).collect();
        ActionKernel::from_values(1, m, 0.5, vals).unwrap()
    }

    #[test]
    fn constants_factor_out() {
        let k = toy();
        let u = GridFunction::constant(1, 16, 2.5).unwrap();
        let tu = lax_oleinik(&k, &u).unwrap();
        for j in 0..16 {
            let col_min = (0..16).map(|i| k.get(i, j)).fold(f64::INFINITY, f64::min);
            assert_eq!(tu.values()[j], 2.5 + col_min);
        }
    }

    #[test]
    fn monotone_and_commutes_with_constants() {
        let k = toy();
        let u = GridFunction::from_fn(1, 16, |x| (x[0] * 7.0).sin()).unwrap();
        let v = u.shifted(0.3);
        let (tu, tv) = (lax_oleinik(&k, &u).unwrap(), lax_oleinik(&k, &v).unwrap());
        for (a, b) in tu.values().iter().zip(tv.values()) {
            assert!(a <= b);
            assert!((b - a - 0.3).abs() < 1e-15);
        }
        let (fu, fv) = (lax_oleinik_forward(&k, &u).unwrap(), lax_oleinik_forward(&k, &v).unwrap());
        for (a, b) in fu.values().iter().zip(fv.values()) {
            assert!(a <= b);
        }
    }

    #[test]
    fn mismatch_rejected() {
        let k = toy();
        let u = GridFunction::constant(1, 32, 0.0).unwrap();
        assert!(lax_oleinik(&k, &u).is_err());
    }
}
