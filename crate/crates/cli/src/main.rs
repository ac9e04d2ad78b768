use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use greencone_cli::commands::{execute, Command};
use greencone_cli::config::ExperimentConfig;
use greencone_cli::report::Timing;
use greencone_cli::CliError;

/// Green bundles, weak KAM solutions and the Aubry set cone check.
#[derive(Debug, Parser)]
#[command(name = "greencone", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    #[arg(long, global = true)]
    t_step: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Trials per randomized suite.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// System name: pendulum, two-site, quartic, free or product.
    #[arg(long, global = true)]
    system: Option<String>,
    /// Cohomology shift, one value per dimension.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    shift: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Randomized cone suites.
    ConeCheck,
    /// Green ladder and limits at a phase point.
    Green {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        p: Option<Vec<f64>>,
        #[arg(long, allow_negative_numbers = true)]
        t_max: Option<f64>,
    },
    /// Weak KAM solution, conjugate pair and lifted set.
    WeakKam {
        /// Reuse a kernel binary instead of building one.
        #[arg(long)]
        kernel: Option<PathBuf>,
    },
    /// Paratingent directions of the lifted set against the Green cone.
    VerifyTheorem {
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        base: Option<usize>,
        /// Inject momentum noise with this seed (a control that must fail).
        #[arg(long, num_args = 0..=1, default_missing_value = "1")]
        adversarial: Option<u64>,
    },
    /// Semi-concavity suites, optionally with the local check on a weak KAM pair.
    Semiconcavity {
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        local: bool,
    },
    /// Action Hessians against pre-Green matrices.
    ActionHessian,
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, Command), CliError> {
    let c = &cli.common;
    let mut cfg = ExperimentConfig::load_or_default(c.config.as_ref())?;
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.resolution {
        cfg.grid.resolution = v;
    }
    if let Some(v) = c.t_step {
        cfg.grid.t_step = v;
    }
    if let Some(v) = c.epsilon {
        cfg.tolerances.epsilon = v;
    }
    if let Some(v) = c.trials {
        cfg.suites.trials = v;
    }
    if let Some(v) = &c.system {
        cfg.system.name = v.clone();
    }
    if let Some(v) = &c.shift {
        cfg.system.shift = v.clone();
    }
    let cmd = match &cli.cmd {
        Sub::ConeCheck => Command::ConeCheck,
        Sub::Green { x, p, t_max } => {
            if let Some(v) = x {
                cfg.green.x = v.clone();
            }
            if let Some(v) = p {
                cfg.green.p = v.clone();
            }
            if let Some(v) = t_max {
                cfg.green.t_max = *v;
            }
            Command::Green
        }
        Sub::WeakKam { kernel } => Command::WeakKam { kernel: kernel.clone() },
        Sub::VerifyTheorem { kernel, base, adversarial } => {
            if base.is_some() {
                cfg.theorem.base = *base;
            }
            Command::VerifyTheorem { kernel: kernel.clone(), adversarial: *adversarial }
        }
        Sub::Semiconcavity { kernel, local } => {
            cfg.semiconcavity.local |= local;
            Command::Semiconcavity { kernel: kernel.clone() }
        }
        Sub::ActionHessian => Command::ActionHessian,
    };
    // the free system takes its dimension from the shift
    if cfg.system.name == "free" && cfg.green.x.len() != cfg.system.shift.len() && c.config.is_none() {
        let n = cfg.system.shift.len();
        cfg.green.x.resize(n, 0.0);
        cfg.green.p.resize(n, 0.0);
    }
    cfg.validate()?;
    Ok((cfg, cmd))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (cfg, cmd) = configure(&cli)?;
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = &cli.common.out;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut phases = Vec::new();
    let result = execute(&cmd, &cfg, out, &mut phases);
    Timing { command: cmd.name().into(), threads: rayon::current_num_threads(), seconds: start.elapsed().as_secs_f64(), phases }
        .write(out)?;
    let report = result?;
    report.write(out)?;
    for c in &report.checks {
        println!("{:<28} {} margin {:.3e}", c.name, if c.pass { "pass" } else { "FAIL" }, c.margin);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("greencone: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
