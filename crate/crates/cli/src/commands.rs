//! The six subcommands. Each writes its series into the output directory and
//! returns a [`Report`]; the caller maps the verdict to the exit code.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use greencone::cones::SymMatrix;
use greencone::dynamics::{
    flow_orbit, green_ladder, modified_green, summarize_ladder, DynamicsError, FlowOptions, PhasePoint, TonelliSystem,
};
use greencone::export::{write_ladder, write_orbit, write_solution};
use greencone::weak_kam::{
    action_hessian_check, build_kernel, conjugate_pair, local_semiconcavity_check, verify_theorem, weak_kam_solve,
    ActionKernel, ActionOptions, Adversarial, ConjugateOptions, ConjugatePairData, GridFunction, HessianCheckOptions,
    SemiconcavityOptions, SolveOptions, TheoremOptions, WeakKamSolution, MIN_RESOLUTION,
};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Check, Report};
use crate::suites::{self, SuiteOutcome};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    ConeCheck,
    Green,
    WeakKam { kernel: Option<PathBuf> },
    VerifyTheorem { kernel: Option<PathBuf>, adversarial: Option<u64> },
    Semiconcavity { kernel: Option<PathBuf> },
    ActionHessian,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ConeCheck => "cone-check",
            Command::Green => "green",
            Command::WeakKam { .. } => "weak-kam",
            Command::VerifyTheorem { .. } => "verify-theorem",
            Command::Semiconcavity { .. } => "semiconcavity",
            Command::ActionHessian => "action-hessian",
        }
    }
}

/// Wall-clock phases recorded for the timing sidecar.
pub type Phases = Vec<(String, f64)>;

pub fn execute(cmd: &Command, cfg: &ExperimentConfig, out: &Path, phases: &mut Phases) -> Result<Report, CliError> {
    let mut report = Report::new(cmd.name(), cfg);
    match cmd {
        Command::ConeCheck => cone_check(cfg, out, &mut report)?,
        Command::Green => green(cfg, out, &mut report)?,
        Command::WeakKam { kernel } => weak_kam(cfg, out, kernel.as_deref(), &mut report, phases)?,
        Command::VerifyTheorem { kernel, adversarial } => {
            verify(cfg, out, kernel.as_deref(), *adversarial, &mut report, phases)?
        }
        Command::Semiconcavity { kernel } => semiconcavity(cfg, out, kernel.as_deref(), &mut report, phases)?,
        Command::ActionHessian => action_hessian(cfg, out, &mut report)?,
    }
    Ok(report)
}

fn timed<T>(phases: &mut Phases, name: &str, f: impl FnOnce() -> T) -> T {
    let start = std::time::Instant::now();
    let v = f();
    phases.push((name.into(), start.elapsed().as_secs_f64()));
    v
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_suites(out: &Path, outcomes: &[SuiteOutcome]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(out, "suites.csv")?);
    w.write_record(["suite", "trials", "failures", "ambiguous", "worst", "tol", "margin", "pass"])?;
    for s in outcomes {
        w.write_record([
            s.name.to_string(),
            s.trials.to_string(),
            s.failures.to_string(),
            s.ambiguous.to_string(),
            format!("{}", s.worst),
            format!("{}", s.tol),
            format!("{}", s.margin()),
            s.passed().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn push_suites(report: &mut Report, cfg: &ExperimentConfig, outcomes: &[SuiteOutcome]) {
    for s in outcomes {
        report.push(Check::new(s.name, &(cfg.seed, s.trials, s.name), s.margin(), s));
    }
}

fn cone_check(cfg: &ExperimentConfig, out: &Path, report: &mut Report) -> Result<(), CliError> {
    let outcomes = suites::cone_suites(cfg.seed, cfg.suites.trials, cfg.tolerances.tol_order);
    write_suites(out, &outcomes)?;
    push_suites(report, cfg, &outcomes);
    let share = outcomes[0].notes.iter().find(|(k, _)| k == "rank_deficient_fraction").map_or(0.0, |n| n.1);
    report.push(Check::new("rank-deficient-share", &(cfg.seed, cfg.suites.trials), share - 0.2, json!({ "fraction": share, "required": 0.2 })));
    Ok(())
}

fn matrix_json(m: &SymMatrix) -> serde_json::Value {
    json!(m.to_row_major())
}

fn green(cfg: &ExperimentConfig, out: &Path, report: &mut Report) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let g = &cfg.green;
    let z = PhasePoint::from_slices(&g.x, &g.p);
    let flow = FlowOptions::default();
    let inputs = (&cfg.system, &g.x, &g.p, g.t_max, cfg.tolerances.tail_tol);
    let (rows, err) = green_ladder(&sys, &z, g.t_max, &flow);
    write_ladder(create(out, "ladder.csv")?, &rows)?;
    if sys.dim() == 1 {
        let orbit = flow_orbit(&sys, &z, g.t_max.min(64.0), g.t_max.min(64.0) / 1024.0, &flow)?;
        write_orbit(create(out, "orbit.csv")?, &orbit)?;
    }
    if let Some(e) = err {
        let time = match &e {
            DynamicsError::ConjugatePoint { time, .. } => Some(*time),
            _ => None,
        };
        return match CliError::from(e.clone()) {
            CliError::Math(_) => {
                // the partial ladder is already on disk
                report.push(Check::new("ladder", &inputs, f64::NEG_INFINITY, json!({ "error": e.to_string(), "time": time, "rows": rows.len() })));
                Ok(())
            }
            other => Err(other),
        };
    }
    let last = rows.last().expect("ladder has a rung");
    let tail_plus = last.residual_plus.unwrap_or(0.0);
    let tail_minus = last.residual_minus.unwrap_or(0.0);
    let tail = tail_plus.max(tail_minus);
    // a single rung carries no residual; convergence is then not assessed
    let tail_margin = if rows.len() > 1 { cfg.tolerances.tail_tol - tail } else { 0.0 };
    report.push(Check::new(
        "tail-convergence",
        &inputs,
        tail_margin,
        json!({ "tail_plus": tail_plus, "tail_minus": tail_minus, "rungs": rows.len(), "t_max": g.t_max }),
    ));
    let tol = if rows.len() > 1 { cfg.tolerances.tail_tol } else { f64::INFINITY };
    match summarize_ladder(rows, g.t_max, tol) {
        Ok(r) => {
            let order = (&r.g_plus - &r.g_minus).min_eigenvalue();
            let (gm_mod, gp_mod) = modified_green(&r.g_minus, &r.g_plus);
            report.push(Check::new(
                "ordered-limits",
                &inputs,
                order + cfg.tolerances.tol_order,
                json!({
                    "g_minus": matrix_json(&r.g_minus),
                    "g_plus": matrix_json(&r.g_plus),
                    "g_minus_modified": matrix_json(&gm_mod),
                    "g_plus_modified": matrix_json(&gp_mod),
                    "orientation": r.orientation,
                    "separation": crate::report::finite(r.separation),
                    "plus_family": r.plus_family,
                    "minus_family": r.minus_family,
                    "limit_gap": (&r.g_plus - &r.g_minus).norm2(),
                }),
            ));
        }
        Err(e) => report.push(Check::new("ordered-limits", &inputs, f64::NEG_INFINITY, json!({ "error": e.to_string() }))),
    }
    Ok(())
}

/// Kernel (loaded or built), backward solution and conjugate pair; writes
/// `kernel.bin` and `solution.csv`.
struct Pipeline {
    kernel: ActionKernel,
    solution: WeakKamSolution,
    pair: ConjugatePairData,
}

fn load_kernel(path: &Path, cfg: &ExperimentConfig, n: usize) -> Result<ActionKernel, CliError> {
    let k = ActionKernel::read_binary(BufReader::new(File::open(path)?))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if k.n != n || k.resolution != cfg.grid.resolution || k.t_step != cfg.grid.t_step {
        return Err(CliError::Config(format!(
            "{}: kernel has n = {}, resolution {}, t_step {}; the configuration asks for n = {n}, resolution {}, t_step {}",
            path.display(),
            k.n,
            k.resolution,
            k.t_step,
            cfg.grid.resolution,
            cfg.grid.t_step
        )));
    }
    Ok(k)
}

fn solve_options(cfg: &ExperimentConfig) -> SolveOptions {
    SolveOptions { tol: cfg.tolerances.solve_tol, ..Default::default() }
}

fn action_options(cfg: &ExperimentConfig) -> ActionOptions {
    ActionOptions { segments: cfg.grid.segments, ..Default::default() }
}

fn pipeline(
    cfg: &ExperimentConfig,
    sys: &TonelliSystem,
    out: &Path,
    kernel_path: Option<&Path>,
    phases: &mut Phases,
) -> Result<Pipeline, CliError> {
    let kernel = match kernel_path {
        Some(p) => timed(phases, "kernel-load", || load_kernel(p, cfg, sys.dim()))?,
        None => timed(phases, "kernel-build", || build_kernel(sys, cfg.grid.resolution, cfg.grid.t_step, action_options(cfg)))?,
    };
    let mut w = create(out, "kernel.bin")?;
    kernel.write_binary(&mut w)?;
    drop(w);
    let solution = timed(phases, "solve", || weak_kam_solve(&kernel, solve_options(cfg)))?;
    let conj = ConjugateOptions { tol: cfg.tolerances.solve_tol, gap_floor: cfg.tolerances.gap_floor, ..Default::default() };
    let pair = timed(phases, "conjugate", || conjugate_pair(sys, &kernel, &solution, conj))?;
    write_solution(create(out, "solution.csv")?, &pair)?;
    Ok(Pipeline { kernel, solution, pair })
}

fn weak_kam(cfg: &ExperimentConfig, out: &Path, kernel_path: Option<&Path>, report: &mut Report, phases: &mut Phases) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let Pipeline { kernel, solution: s, pair } = pipeline(cfg, &sys, out, kernel_path, phases)?;
    let inputs = (&cfg.system, &cfg.grid, &cfg.tolerances);

    // error bar on c from a solve at half the resolution (double on the coarsest grids)
    let other = if cfg.grid.resolution / 2 >= MIN_RESOLUTION { cfg.grid.resolution / 2 } else { 2 * cfg.grid.resolution };
    let k = timed(phases, "comparison-resolution", || build_kernel(&sys, other, cfg.grid.t_step, action_options(cfg)))?;
    let c_other = weak_kam_solve(&k, solve_options(cfg))?.c;
    report.push(Check::new(
        "fixed-point",
        &inputs,
        cfg.tolerances.solve_tol - s.residual,
        json!({
            "c": s.c,
            "c_spread": s.c_spread,
            "comparison_resolution": other,
            "c_comparison": c_other,
            "c_error_bar": (c_other - s.c).abs(),
            "residual": s.residual,
            "iterations": s.iterations,
            "period": s.period,
            "cesaro": s.cesaro,
            "resolution": kernel.resolution,
            "t_step": kernel.t_step,
        }),
    ));
    let above = pair.w.zip_map(&pair.u, |w, u| w - u).max();
    report.push(Check::new(
        "conjugate-pair",
        &inputs,
        cfg.tolerances.gap_floor - above,
        json!({
            "max_w_minus_u": above,
            "gap_threshold": pair.gap_threshold,
            "i_nodes": pair.i_nodes.len(),
            "non_smooth": pair.non_smooth.len(),
            "lipschitz_constant": crate::report::finite(pair.lipschitz_constant),
            "iterations": pair.iterations,
        }),
    ));
    let shift_zero = cfg.system.shift.iter().all(|&c| c == 0.0);
    match cfg.system.name.as_str() {
        "pendulum" if shift_zero => {
            report.push(Check::new("critical-value", &inputs, 1e-3 - (s.c - 1.0).abs(), json!({ "c": s.c, "expected": 1.0, "tol": 1e-3 })));
            let exact = GridFunction::from_fn(1, kernel.resolution, |x| 2.0 / PI * (1.0 - (PI * x[0]).cos().abs()))?;
            let offset = exact.values()[0] - s.u.values()[0];
            let dist = s.u.shifted(offset).sup_distance(&exact);
            report.push(Check::new("profile", &inputs, 5e-3 - dist, json!({ "sup_distance": dist, "tol": 5e-3 })));
        }
        "free" => {
            report.push(Check::new("constant-solution", &inputs, 1e-9 - s.u.range(), json!({ "range": s.u.range(), "c": s.c })));
        }
        _ => {}
    }
    Ok(())
}

fn theorem_options(cfg: &ExperimentConfig, adversarial: Option<u64>) -> TheoremOptions {
    let t = &cfg.tolerances;
    TheoremOptions {
        epsilon: t.epsilon,
        delta_min: t.delta_min,
        delta_max: t.delta_max,
        base: cfg.theorem.base,
        t_max: cfg.theorem.t_max,
        adversarial: adversarial.map(|seed| Adversarial { seed, amplitude: cfg.theorem.adversarial_amplitude }),
        ..Default::default()
    }
}

fn write_directions(out: &Path, n: usize, dirs: &[greencone::weak_kam::DirectionCheck]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(out, "directions.csv")?);
    let axis = |p: &str| if n == 1 { vec![p.to_string()] } else { (1..=n).map(|a| format!("{p}{a}")).collect() };
    let mut header = vec!["i".to_string(), "j".into(), "scale".into()];
    header.extend(axis("h"));
    header.extend(axis("k"));
    header.extend(["margin", "inside", "inside_modified"].map(String::from));
    w.write_record(&header)?;
    for d in dirs {
        let mut rec = vec![d.i.to_string(), d.j.to_string(), format!("{}", d.scale)];
        rec.extend(d.h.iter().chain(&d.k).map(|v| format!("{v}")));
        rec.push(d.margin.map(|m| format!("{m}")).unwrap_or_default());
        rec.push(d.inside.to_string());
        rec.push(d.inside_modified.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn verify(
    cfg: &ExperimentConfig,
    out: &Path,
    kernel_path: Option<&Path>,
    adversarial: Option<u64>,
    report: &mut Report,
    phases: &mut Phases,
) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let p = pipeline(cfg, &sys, out, kernel_path, phases)?;
    let opts = theorem_options(cfg, adversarial);
    let r = timed(phases, "verify", || verify_theorem(&sys, &p.pair, &opts))?;
    write_directions(out, sys.dim(), &r.directions)?;
    write_ladder(create(out, "ladder.csv")?, &r.ladder)?;
    let inputs = (&cfg.system, &cfg.grid, &cfg.tolerances, &cfg.theorem, adversarial);
    // inside ⟺ Sg ≥ −ε on the fattened cone; off L₁ + L₂ counts as −∞
    let worst = r.directions.iter().map(|d| d.margin.map_or(f64::NEG_INFINITY, |m| m + r.epsilon)).fold(f64::INFINITY, f64::min);
    let margin = if r.directions.is_empty() { 0.0 } else { worst };
    let details = serde_json::to_value(&r).expect("report serializes");
    report.push(Check::with_verdict("paratingent-directions", &inputs, margin, r.all_passed(), &details));
    let order = (&r.g_plus - &r.g_minus).min_eigenvalue();
    report.push(Check::with_verdict(
        "modified-consistency",
        &inputs,
        crate::report::finite(order),
        r.modified_consistent,
        json!({ "passed": r.passed, "failed": r.failed, "vacuous": r.vacuous }),
    ));
    Ok(())
}

fn semiconcavity(cfg: &ExperimentConfig, out: &Path, kernel_path: Option<&Path>, report: &mut Report, phases: &mut Phases) -> Result<(), CliError> {
    let outcomes = timed(phases, "suites", || suites::semiconcavity_suites(cfg.seed, cfg.suites.trials, cfg.suites.synthetic_pairs));
    write_suites(out, &outcomes)?;
    push_suites(report, cfg, &outcomes);
    if cfg.semiconcavity.local {
        let sys = cfg.system()?;
        let p = pipeline(cfg, &sys, out, kernel_path, phases)?;
        let l = &cfg.semiconcavity;
        let opts = SemiconcavityOptions { t: l.t, epsilon: l.epsilon, radius: l.radius, ..Default::default() };
        let r = timed(phases, "local", || local_semiconcavity_check(&sys, &p.pair, cfg.theorem.base, &opts, &FlowOptions::default()))?;
        let margin = (r.u.worst_margin + r.tol).min(r.w.worst_margin + r.tol);
        report.push(Check::with_verdict("local-semiconcavity", &(&cfg.system, &cfg.grid, l), margin, r.passed(), &r));
    }
    Ok(())
}

fn action_hessian(cfg: &ExperimentConfig, out: &Path, report: &mut Report) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let h = &cfg.hessian;
    let z = PhasePoint::from_slices(&h.x, &h.p);
    let opts = HessianCheckOptions { segments: h.segments, fd_step: h.fd_step };
    let n = sys.dim();
    let mut w = csv::Writer::from_writer(create(out, "hessian.csv")?);
    let entries = |p: &str| (0..n).flat_map(move |i| (0..n).map(move |j| format!("{p}_{i}{j}"))).collect::<Vec<_>>();
    let mut header = vec!["t".to_string(), "rel_err_plus".into(), "rel_err_minus".into(), "fd_error_estimate".into()];
    for p in ["g_plus_flow", "g_plus_action", "g_minus_flow", "g_minus_action"] {
        header.extend(entries(p));
    }
    w.write_record(&header)?;
    for &t in &h.times {
        let r = action_hessian_check(&sys, &z, t, &opts, &FlowOptions::default())?;
        let mut rec = vec![format!("{t}"), format!("{}", r.rel_err_plus), format!("{}", r.rel_err_minus), format!("{}", r.fd_error_estimate)];
        for m in [&r.g_plus_flow, &r.g_plus_action, &r.g_minus_flow, &r.g_minus_action] {
            rec.extend(m.to_row_major().into_iter().map(|v| format!("{v}")));
        }
        w.write_record(&rec)?;
        report.push(Check::new(
            &format!("action-hessian-t{t}"),
            &(&cfg.system, &h.x, &h.p, t, h.segments, h.fd_step),
            h.tol - r.max_rel_err(),
            json!({ "t": t, "rel_err_plus": r.rel_err_plus, "rel_err_minus": r.rel_err_minus, "tol": h.tol, "fd_error_estimate": r.fd_error_estimate }),
        ));
    }
    w.flush()?;
    Ok(())
}
