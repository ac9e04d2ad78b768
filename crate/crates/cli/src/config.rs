//! Experiment configuration: one TOML file, every key optional, plus flag
//! overrides applied on top.

use std::path::{Path, PathBuf};

use greencone::dynamics::TonelliSystem;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub suites: SuiteConfig,
    pub green: GreenConfig,
    pub theorem: TheoremConfig,
    pub semiconcavity: LocalConfig,
    pub hessian: HessianConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// `pendulum`, `two-site`, `quartic`, `free` or `product`.
    pub name: String,
    pub shift: Vec<f64>,
    /// Quartic coefficient `a` of `½p² + (a/4)p⁴`.
    pub quartic_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    pub t_step: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_order: f64,
    pub tail_tol: f64,
    pub solve_tol: f64,
    pub epsilon: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub gap_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub trials: usize,
    pub synthetic_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremConfig {
    pub base: Option<usize>,
    pub t_max: f64,
    pub adversarial_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    /// Also run the localized check on a weak KAM pair of the configured system.
    pub local: bool,
    pub t: f64,
    pub epsilon: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HessianConfig {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub times: Vec<f64>,
    pub segments: usize,
    pub fd_step: f64,
    pub tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            system: SystemConfig::default(),
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            suites: SuiteConfig::default(),
            green: GreenConfig::default(),
            theorem: TheoremConfig::default(),
            semiconcavity: LocalConfig::default(),
            hessian: HessianConfig::default(),
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { name: "pendulum".into(), shift: vec![0.0], quartic_a: 0.5 }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { resolution: 1024, t_step: 0.5, segments: 32 }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_order: 1e-12, tail_tol: 1e-8, solve_tol: 1e-10, epsilon: 1e-3, delta_min: 1e-3, delta_max: 1e-2, gap_floor: 1e-5 }
    }
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { trials: 10_000, synthetic_pairs: 100 }
    }
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self { x: vec![0.0], p: vec![0.0], t_max: 4.0 }
    }
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self { base: None, t_max: 8192.0, adversarial_amplitude: 1e-3 }
    }
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self { local: false, t: 2.0, epsilon: 1e-2, radius: 0.05 }
    }
}

impl Default for HessianConfig {
    fn default() -> Self {
        Self { x: vec![0.25], p: vec![std::f64::consts::SQRT_2], times: vec![0.5, 1.0, 2.0], segments: 256, fd_step: 1e-4, tol: 1e-3 }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&PathBuf>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), |p| Self::load(p))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tol_order", t.tol_order),
            ("tail_tol", t.tail_tol),
            ("solve_tol", t.solve_tol),
            ("epsilon", t.epsilon),
            ("delta_min", t.delta_min),
            ("delta_max", t.delta_max),
            ("gap_floor", t.gap_floor),
            ("t_step", self.grid.t_step),
            ("green.t_max", self.green.t_max),
            ("theorem.t_max", self.theorem.t_max),
            ("theorem.adversarial_amplitude", self.theorem.adversarial_amplitude),
            ("semiconcavity.t", self.semiconcavity.t),
            ("semiconcavity.epsilon", self.semiconcavity.epsilon),
            ("semiconcavity.radius", self.semiconcavity.radius),
            ("hessian.fd_step", self.hessian.fd_step),
            ("hessian.tol", self.hessian.tol),
        ] {
            positive(name, v)?;
        }
        if t.delta_min >= t.delta_max {
            return Err(CliError::Config(format!("empty scale window [{}, {}]", t.delta_min, t.delta_max)));
        }
        if self.suites.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.hessian.times.is_empty() {
            return Err(CliError::Config("hessian.times is empty".into()));
        }
        for &time in &self.hessian.times {
            positive("hessian.times", time)?;
        }
        let sys = self.system()?;
        let n = sys.dim();
        for (name, v) in [("green.x", &self.green.x), ("green.p", &self.green.p), ("hessian.x", &self.hessian.x), ("hessian.p", &self.hessian.p)] {
            if v.len() != n {
                return Err(CliError::Config(format!("{name} has length {}, the system has dimension {n}", v.len())));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<TonelliSystem, CliError> {
        let s = &self.system;
        let scalar_shift = || -> Result<f64, CliError> {
            match s.shift.as_slice() {
                [c] => Ok(*c),
                _ => Err(CliError::Config(format!("system {} needs a one-component shift", s.name))),
            }
        };
        let sys = match s.name.as_str() {
            "pendulum" => TonelliSystem::pendulum(scalar_shift()?),
            "two-site" => TonelliSystem::two_site(scalar_shift()?),
            "quartic" => TonelliSystem::quartic(s.quartic_a, scalar_shift()?).map_err(|e| CliError::Config(e.to_string()))?,
            "free" => TonelliSystem::free(s.shift.len(), s.shift.clone()).map_err(|e| CliError::Config(e.to_string()))?,
            "product" => match s.shift.as_slice() {
                [a, b] => TonelliSystem::product([*a, *b]),
                _ => return Err(CliError::Config("system product needs a two-component shift".into())),
            },
            other => return Err(CliError::Config(format!("unknown system {other:?}"))),
        };
        Ok(sys)
    }
}
