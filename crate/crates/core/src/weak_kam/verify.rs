use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::conjugate::ConjugatePairData;
use super::WeakKamError;
use crate::cones::{sg_value, ConePair, SgValue, SymMatrix};
use super::grid::GridFunction;
use crate::dynamics::{
    green_limits, modified_green, pre_green, pre_green_minus, FlowOptions, GreenRow, Orientation, PhasePoint,
    TonelliSystem,
};
use crate::semiconcavity::{
    check_semiconcave, check_semiconvex, empirical_paratingent, torus_delta, CertificateReport, PhaseSample,
    SampledFunction, SamplePoint,
};

/// Random momentum noise injected into the local samples, to show the check
/// can fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Adversarial {
    pub seed: u64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremOptions {
    pub epsilon: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Samples within this phase-space distance of the base point are used;
    /// defaults to `delta_max`.
    pub radius: Option<f64>,
    /// Base node; chosen automatically when `None`.
    pub base: Option<usize>,
    pub t_max: f64,
    /// Accepted `|G_T − G_{T/2}|` at the last rung; defaults to `epsilon / 5`.
    pub tail_tol: Option<f64>,
    pub flow: FlowOptions,
    pub adversarial: Option<Adversarial>,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            delta_min: 1e-3,
            delta_max: 1e-2,
            radius: None,
            base: None,
            t_max: 8192.0,
            tail_tol: None,
            flow: FlowOptions::default(),
            adversarial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionCheck {
    pub i: usize,
    pub j: usize,
    pub scale: f64,
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    /// `Sg` of the fattened cone; `None` off `L₁ + L₂`.
    pub margin: Option<f64>,
    pub inside: bool,
    pub inside_modified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub base_node: usize,
    pub z_x: Vec<f64>,
    pub z_p: Vec<f64>,
    pub c: f64,
    pub epsilon: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub radius: f64,
    pub t_max: f64,
    pub g_minus: SymMatrix,
    pub g_plus: SymMatrix,
    pub g_minus_modified: SymMatrix,
    pub g_plus_modified: SymMatrix,
    pub tail_plus: f64,
    pub tail_minus: f64,
    pub orientation: Orientation,
    pub local_samples: usize,
    pub directions: Vec<DirectionCheck>,
    pub passed: usize,
    pub failed: usize,
    pub pass_rate: f64,
    /// The modified cone contains the original one and accepts every direction it accepts.
    pub modified_consistent: bool,
    pub vacuous: bool,
    pub adversarial: Option<Adversarial>,
    pub note: Option<String>,
    /// Pre-Green ladder at the base point.
    #[serde(skip)]
    pub ladder: Vec<GreenRow>,
}

impl TheoremReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn phase_distance(x0: &DVector<f64>, p0: &DVector<f64>, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
    (torus_delta(x0, x).norm_squared() + (p - p0).norm_squared()).sqrt()
}

/// Whether the grid-connected component of lifted `I(u, w)` nodes through
/// `base` stays within two cells of it along every axis.
fn isolated(pair: &ConjugatePairData, base: usize) -> bool {
    let kept: Vec<usize> = pair.i_nodes.iter().copied().filter(|k| !pair.non_smooth.contains(k)).collect();
    let m = pair.u.resolution() as isize;
    let offset = |k: usize| -> isize {
        let b = pair.u.node(base);
        let x = pair.u.node(k);
        torus_delta(&b, &x).iter().map(|d| (d * m as f64).round().abs() as isize).max().unwrap_or(0)
    };
    let mut seen = vec![base];
    let mut stack = vec![base];
    while let Some(k) = stack.pop() {
        for axis in 0..pair.u.dim() {
            for step in [-1, 1] {
                let nb = pair.u.neighbor(k, axis, step);
                if kept.binary_search(&nb).is_err() || seen.contains(&nb) {
                    continue;
                }
                if offset(nb) > 2 {
                    return false;
                }
                seen.push(nb);
                stack.push(nb);
            }
        }
    }
    true
}

/// Node of `I(u, w)` where the lifted momentum is least curved, measured by
/// the second difference along each axis; only nodes whose grid neighbours
/// are also lifted qualify. Falls back to the node of smallest gap.
fn auto_base(pair: &ConjugatePairData) -> Option<usize> {
    let kept: Vec<usize> = pair.i_nodes.iter().copied().filter(|k| !pair.non_smooth.contains(k)).collect();
    let lifted = |k: usize| kept.binary_search(&k).ok().map(|idx| &pair.i_set.samples[idx].1);
    let mut best: Option<(f64, usize)> = None;
    for &k in &kept {
        let mut curvature = 0.0;
        let mut ok = true;
        for axis in 0..pair.u.dim() {
            match (lifted(pair.u.neighbor(k, axis, -1)), lifted(k), lifted(pair.u.neighbor(k, axis, 1))) {
                (Some(a), Some(b), Some(c)) => curvature += (a - b * 2.0 + c).norm(),
                _ => ok = false,
            }
        }
        if ok && best.is_none_or(|(v, _)| curvature < v) {
            best = Some((curvature, k));
        }
    }
    best.map(|b| b.1).or_else(|| {
        kept.iter().copied().min_by(|a, b| pair.gap.values()[*a].total_cmp(&pair.gap.values()[*b]).then(a.cmp(b)))
    })
}

fn contains(pair: &ConePair, h: &DVector<f64>, k: &DVector<f64>, tol: f64) -> Result<(Option<f64>, bool), WeakKamError> {
    let v = crate::cones::TangentVector::new(h.clone(), k.clone())?;
    Ok(match sg_value(pair, &v)? {
        SgValue::Finite(s) => (Some(s), s >= -tol),
        SgValue::MinusInfinity => (None, false),
    })
}

/// Check that every finite-scale paratingent direction of the lifted
/// `I(u, w)` near the base point lies in `C(G₋ − εI, G₊ + εI)` (membership
/// with tolerance `ε`), and that the same holds in the modified cone
/// `C(2G₋ − G₊, 2G₊ − G₋)`, fattened alike.
pub fn verify_theorem(sys: &TonelliSystem, pair: &ConjugatePairData, opts: &TheoremOptions) -> Result<TheoremReport, WeakKamError> {
    let eps = opts.epsilon;
    if !(eps > 0.0) || !(opts.delta_min > 0.0) || !(opts.delta_max > opts.delta_min) {
        return Err(WeakKamError::InvalidArgument("need ε > 0 and 0 < δ_min < δ_max".into()));
    }
    let base = match opts.base {
        Some(b) => b,
        None => auto_base(pair).ok_or_else(|| WeakKamError::InvalidArgument("I(u, w) has no smooth point".into()))?,
    };
    let (zx, zp) = pair
        .lifted(base)
        .cloned()
        .ok_or_else(|| WeakKamError::InvalidArgument(format!("node {base} is not a lifted point of I(u, w)")))?;
    let radius = opts.radius.unwrap_or(opts.delta_max);
    let mut local: Vec<(usize, PhaseSample)> = pair
        .i_nodes
        .iter()
        .filter(|k| !pair.non_smooth.contains(k))
        .zip(&pair.i_set.samples)
        .filter(|(_, (x, p))| phase_distance(&zx, &zp, x, p) <= radius)
        .map(|(&k, (x, p))| (k, PhaseSample { x: x.clone(), p: p.clone() }))
        .collect();
    if let Some(adv) = opts.adversarial {
        let mut rng = ChaCha8Rng::seed_from_u64(adv.seed);
        for (_, s) in &mut local {
            for v in s.p.iter_mut() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *v += adv.amplitude * noise;
            }
        }
    }

    let tail_tol = opts.tail_tol.unwrap_or(0.2 * eps);
    let green = green_limits(sys, &PhasePoint::new(zx.clone(), zp.clone()), opts.t_max, tail_tol, &opts.flow)?;
    let (g_minus_modified, g_plus_modified) = modified_green(&green.g_minus, &green.g_plus);
    let fat = |lo: &SymMatrix, hi: &SymMatrix| ConePair::new(lo.shifted(-eps), hi.shifted(eps));
    let cone = fat(&green.g_minus, &green.g_plus)?;
    let modified = fat(&g_minus_modified, &g_plus_modified)?;

    let mut report = TheoremReport {
        base_node: base,
        z_x: zx.as_slice().to_vec(),
        z_p: zp.as_slice().to_vec(),
        c: pair.c,
        epsilon: eps,
        delta_min: opts.delta_min,
        delta_max: opts.delta_max,
        radius,
        t_max: green.t_max,
        g_minus: green.g_minus.clone(),
        g_plus: green.g_plus.clone(),
        g_minus_modified: g_minus_modified.clone(),
        g_plus_modified: g_plus_modified.clone(),
        tail_plus: green.tail_plus,
        tail_minus: green.tail_minus,
        orientation: green.orientation,
        local_samples: local.len(),
        directions: Vec::new(),
        passed: 0,
        failed: 0,
        pass_rate: 1.0,
        modified_consistent: g_minus_modified.le(&green.g_minus, 1e-12) && green.g_plus.le(&g_plus_modified, 1e-12),
        vacuous: false,
        adversarial: opts.adversarial,
        note: None,
        ladder: green.rows.clone(),
    };
    if isolated(pair, base) {
        report.vacuous = true;
        report.note = Some(format!(
            "isolated point of I(u, w): its component spans at most two grid cells ({} local samples); passes vacuously",
            local.len()
        ));
        return Ok(report);
    }

    let samples: Vec<PhaseSample> = local.iter().map(|(_, s)| s.clone()).collect();
    let directions = match empirical_paratingent(&samples, true, opts.delta_min, opts.delta_max) {
        Ok(d) => d,
        Err(e) => {
            report.vacuous = true;
            report.note = Some(format!("no paratingent direction in the window: {e}"));
            return Ok(report);
        }
    };
    for d in directions {
        let (margin, inside) = contains(&cone, &d.direction.h, &d.direction.k, eps)?;
        let (_, inside_modified) = contains(&modified, &d.direction.h, &d.direction.k, eps)?;
        report.modified_consistent &= !inside || inside_modified;
        if inside {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
        report.directions.push(DirectionCheck {
            i: local[d.i].0,
            j: local[d.j].0,
            scale: d.scale,
            h: d.direction.h.as_slice().to_vec(),
            k: d.direction.k.as_slice().to_vec(),
            margin,
            inside,
            inside_modified,
        });
    }
    report.pass_rate = report.passed as f64 / (report.passed + report.failed) as f64;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiconcavityOptions {
    /// Horizon of the pre-Green matrices `G_{±T}`.
    pub t: f64,
    pub epsilon: f64,
    pub radius: f64,
    /// Slope agreement demanded of grid differences; nodes failing it are skipped.
    pub smooth_tol: f64,
}

impl Default for SemiconcavityOptions {
    fn default() -> Self {
        Self { t: 2.0, epsilon: 1e-2, radius: 0.05, smooth_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalSemiconcavityReport {
    pub base_node: usize,
    pub t: f64,
    pub epsilon: f64,
    pub radius: f64,
    /// Value tolerance of both certificates: the gap threshold of the pair.
    pub tol: f64,
    pub g_t: SymMatrix,
    pub g_minus_t: SymMatrix,
    pub samples: usize,
    pub u: CertificateReport,
    pub w: CertificateReport,
}

impl LocalSemiconcavityReport {
    pub fn passed(&self) -> bool {
        self.u.passed() && self.w.passed()
    }
}

/// On grid nodes within `radius` of the base node: `u` is
/// `(G_T(x₀) + εI)`-semi-concave and `w` is `(G_{−T}(x₀) − εI)`-semi-convex,
/// with super- and sub-gradients from central differences at smooth nodes.
pub fn local_semiconcavity_check(
    sys: &TonelliSystem,
    pair: &ConjugatePairData,
    base: Option<usize>,
    opts: &SemiconcavityOptions,
    flow: &FlowOptions,
) -> Result<LocalSemiconcavityReport, WeakKamError> {
    let base = match base {
        Some(b) => b,
        None => auto_base(pair).ok_or_else(|| WeakKamError::InvalidArgument("I(u, w) has no smooth point".into()))?,
    };
    let (zx, zp) = pair
        .lifted(base)
        .cloned()
        .ok_or_else(|| WeakKamError::InvalidArgument(format!("node {base} is not a lifted point of I(u, w)")))?;
    let z = PhasePoint::new(zx.clone(), zp);
    let g_t = pre_green(sys, &z, opts.t, flow)?;
    let g_minus_t = pre_green_minus(sys, &z, opts.t, flow)?;
    let sampled = |f: &GridFunction| {
        let points = (0..f.len())
            .filter_map(|k| {
                let d = torus_delta(&zx, &f.node(k));
                if d.norm() > opts.radius {
                    return None;
                }
                let l = f.smooth_gradient(k, opts.smooth_tol)?;
                Some(SamplePoint { x: &zx + d, f: f.values()[k], l })
            })
            .collect();
        SampledFunction::new(points, opts.radius)
    };
    let (su, sw) = (sampled(&pair.u), sampled(&pair.w));
    let tol = pair.gap_threshold;
    Ok(LocalSemiconcavityReport {
        base_node: base,
        t: opts.t,
        epsilon: opts.epsilon,
        radius: opts.radius,
        tol,
        samples: su.points.len(),
        u: check_semiconcave(&su, &g_t.shifted(opts.epsilon), tol),
        w: check_semiconvex(&sw, &g_minus_t.shifted(-opts.epsilon), tol),
        g_t,
        g_minus_t,
    })
}
