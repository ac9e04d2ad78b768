//! `report.json`: command, config echo, one record per check, versions.
//! Wall-clock data goes to the `timing.json` sidecar so reports of identical
//! runs compare byte for byte.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// SHA-256 of the canonical JSON of the check's inputs.
    pub inputs_digest: String,
    /// Signed slack of the pass criterion; negative exactly when the check fails.
    pub margin: f64,
    pub pass: bool,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub versions: Versions,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub greencone: &'static str,
}

/// JSON has no infinities; they are clamped so every margin stays numeric.
pub fn finite(x: f64) -> f64 {
    if x.is_nan() {
        f64::MIN
    } else {
        x.clamp(f64::MIN, f64::MAX)
    }
}

pub fn digest<T: Serialize>(inputs: &T) -> String {
    let bytes = serde_json::to_vec(inputs).expect("inputs serialize");
    hex::encode(Sha256::digest(&bytes))
}

impl Check {
    pub fn new<I: Serialize, D: Serialize>(name: &str, inputs: &I, margin: f64, details: D) -> Self {
        let margin = finite(margin);
        Self {
            name: name.into(),
            inputs_digest: digest(inputs),
            margin,
            pass: margin >= 0.0,
            details: serde_json::to_value(details).expect("details serialize"),
        }
    }

    /// A check whose verdict is not a threshold comparison; the margin is
    /// reported as given.
    pub fn with_verdict<I: Serialize, D: Serialize>(name: &str, inputs: &I, margin: f64, pass: bool, details: D) -> Self {
        Self { pass, ..Self::new(name, inputs, margin, details) }
    }
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            checks: Vec::new(),
            passed: true,
            versions: Versions { greencone: env!("CARGO_PKG_VERSION") },
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.pass;
        self.checks.push(check);
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        fs::write(dir.join("report.json"), text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub command: String,
    pub threads: usize,
    pub seconds: f64,
    pub phases: Vec<(String, f64)>,
}

impl Timing {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("timing serializes");
        text.push('\n');
        fs::write(dir.join("timing.json"), text)?;
        Ok(())
    }
}
