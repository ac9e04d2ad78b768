//! Dormand–Prince 5(4) with local extrapolation and FSAL, for autonomous systems.

use super::DynamicsError;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, h_min: 1e-14, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    /// Integrate the autonomous system `y' = f(y)` from `y0` over a signed
    /// duration `t`. `observe(τ, y)` is called after every accepted step with
    /// the elapsed signed time and may abort the run.
    pub fn integrate<F, O>(&self, mut f: F, y0: &[f64], t: f64, mut observe: O) -> Result<(Vec<f64>, StepStats), DynamicsError>
    where
        F: FnMut(&[f64], &mut [f64]),
        O: FnMut(f64, &[f64]) -> Result<(), DynamicsError>,
    {
        let dim = y0.len();
        let mut y = y0.to_vec();
        let mut stats = StepStats::default();
        if t == 0.0 {
            return Ok((y, stats));
        }
        if !t.is_finite() {
            return Err(DynamicsError::IntegratorFailure { time: 0.0, step: f64::NAN });
        }
        let dir = t.signum();
        let span = t.abs();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
        let mut stage = vec![0.0; dim];
        let mut y_new = vec![0.0; dim];
        f(&y, &mut k[0]);

        let mut h = self.initial_step(&mut f, &y, &k[0], span);
        let mut elapsed = 0.0;
        while elapsed < span {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(DynamicsError::IntegratorFailure { time: dir * elapsed, step: h });
            }
            let last = elapsed + h >= span;
            let h_used = if last { span - elapsed } else { h };
            let hs = dir * h_used;
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = y[i] + hs * acc;
                }
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
                f(&stage, &mut k[s]);
            }
            let mut err = 0.0;
            for i in 0..dim {
                let mut e = 0.0;
                for (s, ks) in k.iter().enumerate() {
                    e += E[s] * ks[i];
                }
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (hs * e / sc).powi(2);
            }
            let err = (err / dim as f64).sqrt();
            if !err.is_finite() {
                return Err(DynamicsError::IntegratorFailure { time: dir * elapsed, step: h_used });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                elapsed = if last { span } else { elapsed + h_used };
                y.copy_from_slice(&y_new);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                stats.accepted += 1;
                observe(dir * elapsed, &y)?;
                h = (h_used * factor).max(self.h_min);
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
                h = h_used * factor.min(1.0);
                if h < self.h_min {
                    return Err(DynamicsError::IntegratorFailure { time: dir * elapsed, step: h });
                }
            }
        }
        Ok((y, stats))
    }

    fn initial_step<F: FnMut(&[f64], &mut [f64])>(&self, f: &mut F, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let scale = |v: f64| self.atol + self.rtol * v.abs();
        let d0 = rms(y.iter().map(|&v| v / scale(v)));
        let d1 = rms(y.iter().zip(f0).map(|(&v, &d)| d / scale(v)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        // one explicit Euler probe for the second derivative
        let y1: Vec<f64> = y.iter().zip(f0).map(|(&v, &d)| v + h0 * d).collect();
        let mut f1 = vec![0.0; y.len()];
        f(&y1, &mut f1);
        let d2 = rms(y.iter().zip(f1.iter().zip(f0)).map(|(&v, (&a, &b))| (a - b) / scale(v))) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span).max(self.h_min)
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (s / n.max(1) as f64).sqrt()
}
