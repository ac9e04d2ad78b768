mod common;

use std::f64::consts::PI;

use common::{check, greencone, passes, report, seconds};
use serde_json::Value;
use tempfile::tempdir;

#[test]
fn negative_tolerance_is_a_config_error() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[tolerances]\ntol_order = -1.0\n").unwrap();
    let out = greencone(&dir.path().join("o"), &["--config", cfg.to_str().unwrap(), "cone-check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tol_order"));
}

#[test]
fn unknown_keys_and_systems_are_rejected() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[grid]\nresolutoin = 64\n").unwrap();
    assert_eq!(greencone(dir.path(), &["--config", cfg.to_str().unwrap(), "cone-check"]).status.code(), Some(2));
    assert_eq!(greencone(dir.path(), &["--system", "rotor", "cone-check"]).status.code(), Some(2));
}

#[test]
fn zero_horizon_is_a_usage_error() {
    let dir = tempdir().unwrap();
    assert_eq!(greencone(dir.path(), &["green", "--t-max", "0"]).status.code(), Some(2));
}

#[test]
fn smoke_run_is_fast() {
    let dir = tempdir().unwrap();
    let out = greencone(dir.path(), &["--trials", "10", "cone-check"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(seconds(dir.path()) < 1.0);
    let r = report(dir.path());
    assert_eq!(r["command"], "cone-check");
    assert!(r["passed"].as_bool().unwrap());
    let csv = std::fs::read_to_string(dir.path().join("suites.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn every_check_has_a_numeric_margin_matching_its_verdict() {
    let dir = tempdir().unwrap();
    greencone(dir.path(), &["--trials", "50", "semiconcavity"]);
    let r = report(dir.path());
    for c in r["checks"].as_array().unwrap() {
        let m = c["margin"].as_f64().expect("numeric margin");
        assert_eq!(c["pass"].as_bool().unwrap(), m >= 0.0, "{c}");
        assert_eq!(c["inputs_digest"].as_str().unwrap().len(), 64);
    }
}

fn shape(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), shape(x))).collect()),
        Value::Array(a) => Value::Array(a.iter().map(shape).collect()),
        Value::Number(_) => Value::from(0),
        Value::String(_) => Value::from(""),
        other => other.clone(),
    }
}

#[test]
fn report_structure_is_stable_across_seeds() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    greencone(a.path(), &["--trials", "20", "--seed", "1", "cone-check"]);
    greencone(b.path(), &["--trials", "20", "--seed", "2", "cone-check"]);
    assert_eq!(shape(&report(a.path())), shape(&report(b.path())));
}

#[test]
fn green_at_the_saddle() {
    let dir = tempdir().unwrap();
    assert_eq!(greencone(dir.path(), &["green"]).status.code(), Some(0));
    let r = report(dir.path());
    let d = &check(&r, "ordered-limits")["details"];
    assert!((d["g_plus"][0].as_f64().unwrap() - 2.0 * PI).abs() <= 1e-6);
    assert!((d["g_minus"][0].as_f64().unwrap() + 2.0 * PI).abs() <= 1e-6);
    assert_eq!(d["orientation"], "plus-above");
    let ladder = std::fs::read_to_string(dir.path().join("ladder.csv")).unwrap();
    assert_eq!(ladder.lines().next().unwrap(), "t,g_t_00,g_minus_t_00,residual_plus,residual_minus");
    assert_eq!(ladder.lines().count(), 4);
    let orbit = std::fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(orbit.starts_with("t,x,p,H\n"));
}

#[test]
fn green_on_a_libration_fails_with_partial_ladder() {
    let dir = tempdir().unwrap();
    let out = greencone(dir.path(), &["green", "--x", "0.5", "--p", "0.1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!passes(&report(dir.path()), "tail-convergence"));
    let ladder = std::fs::read_to_string(dir.path().join("ladder.csv")).unwrap();
    assert!(ladder.lines().count() > 1);
}

#[test]
fn free_system_has_a_constant_solution() {
    let dir = tempdir().unwrap();
    let out = greencone(dir.path(), &["--system", "free", "--shift", "0", "--resolution", "32", "weak-kam"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(passes(&report(dir.path()), "constant-solution"));
}

#[test]
fn coarse_grid_converges_and_reports_an_error_bar() {
    let dir = tempdir().unwrap();
    assert_eq!(greencone(dir.path(), &["--resolution", "16", "weak-kam"]).status.code(), Some(0));
    let r = report(dir.path());
    let d = &check(&r, "fixed-point")["details"];
    assert_eq!(d["comparison_resolution"], 32);
    assert!(d["c_error_bar"].as_f64().unwrap() >= 0.0);
    assert!(passes(&r, "critical-value"));
    let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,u,w,gap,in_i_set,p");
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn kernel_reuse_checks_the_grid() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(greencone(&a, &["--resolution", "32", "weak-kam"]).status.code(), Some(0));
    let kernel = a.join("kernel.bin");
    let b = dir.path().join("b");
    assert_eq!(greencone(&b, &["--resolution", "32", "weak-kam", "--kernel", kernel.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("solution.csv")).unwrap(), std::fs::read(b.join("solution.csv")).unwrap());
    let c = dir.path().join("c");
    assert_eq!(greencone(&c, &["--resolution", "64", "weak-kam", "--kernel", kernel.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn theorem_is_vacuous_at_the_saddle() {
    let dir = tempdir().unwrap();
    let out = greencone(dir.path(), &["--resolution", "256", "verify-theorem"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    let d = &check(&r, "paratingent-directions")["details"];
    assert_eq!(d["vacuous"], true);
    assert!(d["note"].as_str().unwrap().contains("vacuous"));
    assert!(dir.path().join("directions.csv").exists());
}

#[test]
fn local_semiconcavity_on_the_circle() {
    let dir = tempdir().unwrap();
    let out = greencone(dir.path(), &["--trials", "20", "--resolution", "256", "--shift", "2", "semiconcavity", "--local"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(passes(&report(dir.path()), "local-semiconcavity"));
}
