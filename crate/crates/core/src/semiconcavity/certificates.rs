use nalgebra::DVector;
use serde::Serialize;

use crate::cones::SymMatrix;

/// One sample `(x, f(x), l_x)` with a super- or sub-gradient candidate `l_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub x: DVector<f64>,
    pub f: f64,
    pub l: DVector<f64>,
}

/// A function known only through samples; `radius` records the size of the
/// region they were drawn from.
#[derive(Debug, Clone, Default)]
pub struct SampledFunction {
    pub points: Vec<SamplePoint>,
    pub radius: f64,
}

impl SampledFunction {
    pub fn new(points: Vec<SamplePoint>, radius: f64) -> Self {
        Self { points, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    /// Amount by which the inequality fails, beyond the tolerance-free bound.
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CertificateReport {
    pub pairs_checked: usize,
    /// Smallest slack of the inequality over all pairs (negative = violated).
    pub worst_margin: f64,
    pub violations: Vec<Violation>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn pairwise(samples: &SampledFunction, tol: f64, slack: impl Fn(&SamplePoint, &SamplePoint) -> f64) -> CertificateReport {
    let mut report = CertificateReport { worst_margin: f64::INFINITY, ..Default::default() };
    for (i, pi) in samples.points.iter().enumerate() {
        for (j, pj) in samples.points.iter().enumerate() {
            if i == j {
                continue;
            }
            let margin = slack(pi, pj);
            report.pairs_checked += 1;
            report.worst_margin = report.worst_margin.min(margin);
            if margin < -tol {
                report.violations.push(Violation { i, j, excess: -margin });
            }
        }
    }
    report
}

/// Check `f(x_j) − f(x_i) − l_i·(x_j − x_i) ≤ ½A(x_j − x_i)² + tol` on every
/// ordered pair of samples. An empty violation list certifies `A`-semi-concavity
/// on the sample.
pub fn check_semiconcave(samples: &SampledFunction, a: &SymMatrix, tol: f64) -> CertificateReport {
    pairwise(samples, tol, |pi, pj| {
        let d = &pj.x - &pi.x;
        0.5 * a.quad(&d) - (pj.f - pi.f - pi.l.dot(&d))
    })
}

/// Check `f(x_j) − f(x_i) − l_i·(x_j − x_i) ≥ ½A(x_j − x_i)² − tol`, i.e.
/// `f − ½Ax²` convex on the sample.
pub fn check_semiconvex(samples: &SampledFunction, a: &SymMatrix, tol: f64) -> CertificateReport {
    pairwise(samples, tol, |pi, pj| {
        let d = &pj.x - &pi.x;
        (pj.f - pi.f - pi.l.dot(&d)) - 0.5 * a.quad(&d)
    })
}

/// Pairwise midpoint test of concavity of `f − ½Ax²`: returns the pairs
/// `(i, j)` where `g((x_i + x_j)/2) < (g(x_i) + g(x_j))/2 − tol`.
pub fn midpoint_concavity_violations(
    f: impl Fn(&DVector<f64>) -> f64,
    points: &[DVector<f64>],
    a: &SymMatrix,
    tol: f64,
) -> Vec<(usize, usize)> {
    let g = |x: &DVector<f64>| f(x) - 0.5 * a.quad(x);
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let mid = (&points[i] + &points[j]) * 0.5;
            if g(&mid) < 0.5 * (g(&points[i]) + g(&points[j])) - tol {
                out.push((i, j));
            }
        }
    }
    out
}
