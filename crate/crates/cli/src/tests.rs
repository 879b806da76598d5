use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

use super::exit_status;

fn nevlab(args: &[&str]) -> u8 {
    exit_status(std::iter::once("nevlab").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs with JSON output into a scratch file; returns the status and the document.
fn json_status(args: &[&str]) -> (u8, Value, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let mut all = args.to_vec();
    all.extend(["--format", "json", "--out", path(&out)]);
    let status = nevlab(&all);
    let doc = fs::read_to_string(&out).map(|t| serde_json::from_str(&t).unwrap()).unwrap_or(Value::Null);
    (status, doc, dir)
}

fn json_run(args: &[&str]) -> Value {
    let (status, doc, _dir) = json_status(args);
    assert_eq!(status, 0, "{args:?}");
    doc
}

fn scratch(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn char_exp_z_rows_and_pi_anchor() {
    let v = json_run(&["char", "--fn", "exp_z", "--rmin", "1", "--rmax", "30", "--count", "50"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 50);
    let v = json_run(&["char", "--fn", "exp_z", "--radii", &std::f64::consts::PI.to_string()]);
    assert!((v["rows"][0]["T"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn char_constant_is_log_five() {
    let v = json_run(&["char", "--fn", "const_5"]);
    for row in v["rows"].as_array().unwrap() {
        assert!((row["T"].as_f64().unwrap() - 5f64.ln()).abs() < 1e-15);
    }
}

#[test]
fn rerun_gives_identical_bytes_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["a.csv", "b.csv", "c.csv"].iter().map(|n| scratch(&dir, n)).collect();
    let modes = ["parallel", "parallel", "sequential"];
    for (f, m) in files.iter().zip(modes) {
        assert_eq!(nevlab(&["char", "--fn", "exp_z2", "--count", "20", "--execution", m, "--out", path(f)]), 0);
    }
    let a = fs::read(&files[0]).unwrap();
    assert_eq!(a, fs::read(&files[1]).unwrap());
    assert_eq!(a, fs::read(&files[2]).unwrap());
}

#[test]
fn echoed_config_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = scratch(&dir, "first.csv");
    let second = scratch(&dir, "second.csv");
    assert_eq!(nevlab(&["verify", "smt", "--count", "12", "--out", path(&first)]), 0);
    let echo = scratch(&dir, "first.csv.config.json");
    let cfg: Value = serde_json::from_str(&fs::read_to_string(&echo).unwrap()).unwrap();
    assert_eq!(cfg["command"], "verify smt");
    assert_eq!(cfg["params"]["count"], 12);
    assert_eq!(nevlab(&["verify", "smt", "--config", path(&echo), "--out", path(&second)]), 0);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_eq!(fs::read(&echo).unwrap(), fs::read(scratch(&dir, "second.csv.config.json")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scratch(&dir, "p.json");
    fs::write(&cfg, r#"{"fn": "exp_z", "count": 7, "rmin": 1, "rmax": 2}"#).unwrap();
    let v = json_run(&["char", "--config", path(&cfg), "--count", "3"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["params"]["rmax"], 2.0);
}

#[test]
fn config_for_another_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scratch(&dir, "c.json");
    fs::write(&cfg, r#"{"command": "census", "execution": "parallel", "format": "csv", "params": {}}"#).unwrap();
    assert_eq!(nevlab(&["verify", "pest", "--config", path(&cfg)]), 1);
    fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(nevlab(&["verify", "pest", "--config", path(&cfg)]), 1);
}

#[test]
fn exit_codes() {
    assert_eq!(json_status(&["verify", "pest", "--trials", "20", "--seed", "7"]).0, 0);
    assert_eq!(nevlab(&["char", "--fn", "nope"]), 1);
    assert_eq!(nevlab(&["char", "--bogus-flag"]), 1);
    assert_eq!(nevlab(&["--version"]), 0);
    // a third value is not invariant
    let (status, doc, _dir) = json_status(&["census", "--values", "0.5+0.5i"]);
    assert_eq!(status, 2);
    assert_eq!(doc["verdict"]["failed_values"][0], "0.5+0.5i");
    // an impossible hyper-order cap
    let (status, _, _dir) = json_status(&["hyperorder", "--fn", "exp_exp_z", "--rmin", "5", "--rmax", "30", "--max", "0.5"]);
    assert_eq!(status, 2);
}

#[test]
fn failing_smt_lists_radii() {
    // slack -1.5 leaves half a characteristic on the right, too little for e^(z^2)
    let (status, doc, _dir) = json_status(&["verify", "smt", "--slack=-1.5", "--count", "8"]);
    assert_eq!(status, 2);
    assert_eq!(doc["verdict"]["failing_radii"].as_array().unwrap().len(), 8);
}

#[test]
fn orbit_reproduces_first_iterates() {
    let v = json_run(&["orbit", "--figure1", "left", "--seed", "4", "--k", "2"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[1]["z_re"].as_f64().unwrap(), rows[1]["z_im"].as_f64().unwrap()), (5.0, 0.4));
    // z + (1/2 + i/5) sqrt z with the square root taken in polar form
    let (x, y) = (5.0f64, 0.4f64);
    let (rho, th) = ((x * x + y * y).sqrt().sqrt(), y.atan2(x) / 2.0);
    let (sx, sy) = (rho * th.cos(), rho * th.sin());
    let want = (x + 0.5 * sx - 0.2 * sy, y + 0.5 * sy + 0.2 * sx);
    assert!((rows[2]["z_re"].as_f64().unwrap() - want.0).abs() < 1e-12);
    assert!((rows[2]["z_im"].as_f64().unwrap() - want.1).abs() < 1e-12);
}

#[test]
fn construct_then_census_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let fam = scratch(&dir, "fam.json");
    let status = nevlab(&["construct", "--figure1", "right", "--generations", "20", "--format", "json", "--out", path(&fam)]);
    assert_eq!(status, 0);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&fam).unwrap()).unwrap();
    assert_eq!(doc["meta"]["zeros"], 100);
    assert_eq!(doc["meta"]["poles"], 60);
    let v = json_run(&["census", "--family", path(&fam), "--values", "0,inf"]);
    assert_eq!(v["verdict"]["pass"], true);
}

#[test]
fn counterexample_passes() {
    let v = json_run(&["counterexample", "--k", "1", "--probes", "100"]);
    assert!(v["verdict"]["max_identity_error"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn lemma1_reports_k() {
    let v = json_run(&["verify", "lemma1", "--alpha", "2", "--delta", "0.5", "--count", "10"]);
    assert_eq!(v["verdict"]["cases"][0]["K"], 1984.0);
    assert_eq!(v["rows"][0]["K"], 1984.0);
}

#[test]
fn growth_and_borel_drivers() {
    let v = json_run(&["verify", "growth"]);
    assert_eq!(v["verdict"]["dichotomy"], "consistent");
    let v = json_run(&["verify", "borel", "--fn", "exp_z,const_5"]);
    assert_eq!(v["verdict"]["pass"], true);
    assert!(v["reports"][1]["report"].is_null());
}
