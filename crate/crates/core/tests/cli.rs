use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entquasi::cli::{EXIT_INCONCLUSIVE, EXIT_MALFORMED, EXIT_OK, EXIT_VERIFY_FAILED};
use entquasi::io::{decomposition_json, state_json, to_string};
use entquasi::{fixtures, random, DensityOperator, QuasiDistribution};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_entquasi"));
    c.env_remove("ENTQUASI_SEED");
    c
}

fn write_state(dir: &TempDir, name: &str, rho: &DensityOperator) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, to_string(&state_json(rho.dims(), rho.matrix()))).unwrap();
    path
}

fn write_text(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_bell_is_entangled_and_verifies() {
    let dir = TempDir::new().unwrap();
    let state = write_state(&dir, "bell.json", &fixtures::bell_state());
    let out = run(&["analyze", p(&state), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let v = json(&out);
    assert_eq!(v["verdict"], "Entangled");
    assert!((v["min_weight"].as_f64().unwrap() + 0.25).abs() < 1e-8);
    assert_eq!(v["config"]["rng_seed"], 7);

    let report = write_text(&dir, "report.json", std::str::from_utf8(&out.stdout).unwrap());
    let out = run(&["verify", p(&state), p(&report)]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(json(&out)["ok"], true);
}

#[test]
fn reconstruct_output_verifies() {
    let dir = TempDir::new().unwrap();
    let rho = random::density(entquasi::Dims::new(2, 3).unwrap(), &mut random::rng(3));
    let state = write_state(&dir, "s.json", &rho);
    let out = run(&["reconstruct", p(&state)]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let qd = write_text(&dir, "qd.json", std::str::from_utf8(&out.stdout).unwrap());
    assert_eq!(run(&["verify", p(&state), p(&qd)]).status.code(), Some(EXIT_OK));
}

#[test]
fn wrong_decomposition_fails_verification() {
    let dir = TempDir::new().unwrap();
    let state = write_state(&dir, "bell.json", &fixtures::bell_state());
    let mut qd = QuasiDistribution::new(fixtures::qubits());
    qd.push(1.0, fixtures::phase_product(0, 0)).unwrap();
    let qd = write_text(&dir, "qd.json", &to_string(&decomposition_json(&qd)));
    let out = run(&["verify", p(&state), p(&qd)]);
    assert_eq!(out.status.code(), Some(EXIT_VERIFY_FAILED));
    assert_eq!(json(&out)["ok"], false);
}

#[test]
fn malformed_inputs_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"dims": [2, 2], "matrix": [[[1, 0]]]}"#, "field `matrix`"),
        (r#"{"dims": [2], "matrix": []}"#, "field `dims`"),
        (r#"{"dims": [1, 1], "matrix": [[["a", 0]]]}"#, "field `matrix[0][0][0]`"),
        ("not json", "field `<root>`"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let path = write_text(&dir, &format!("bad{k}.json"), text);
        let out = run(&["analyze", p(&path)]);
        assert_eq!(out.status.code(), Some(EXIT_MALFORMED), "{text}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(needle), "{err}");
        assert!(out.stdout.is_empty());
    }
    let state = write_state(&dir, "bell.json", &fixtures::bell_state());
    let qd = write_text(&dir, "qd.json", r#"{"dims":[2,2],"terms":[{"weight":1,"a":[[1,0],[0,0]],"b":[[1,0]]}]}"#);
    let out = run(&["verify", p(&state), p(&qd)]);
    assert_eq!(out.status.code(), Some(EXIT_MALFORMED));
    assert!(String::from_utf8(out.stderr).unwrap().contains("terms[0].b"));
}

#[test]
fn inconclusive_exits_3() {
    let dir = TempDir::new().unwrap();
    let rho = random::density(fixtures::qubits(), &mut random::rng(7001));
    let state = write_state(&dir, "s.json", &rho);
    let out = run(&["analyze", p(&state), "--restarts", "20"]);
    let v = json(&out);
    let code = out.status.code().unwrap();
    if v["verdict"] == "Inconclusive" {
        assert_eq!(code, EXIT_INCONCLUSIVE);
        assert!(!v["diagnostics"].as_array().unwrap().is_empty());
    } else {
        assert_eq!(code, EXIT_OK);
    }
}

#[test]
fn seed_env_is_overridden_by_flag() {
    let dir = TempDir::new().unwrap();
    let state = write_state(&dir, "s.json", &fixtures::mixed_plus_plus());
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.args(["sep-eigen", p(&state), "--restarts", "5"]);
        if let Some(e) = env {
            c.env("ENTQUASI_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        json(&c.output().unwrap())["config"]["rng_seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(None, None), entquasi::sep_eigen::DEFAULT_SEED);
    assert_eq!(seed_of(Some("11"), None), 11);
    assert_eq!(seed_of(Some("11"), Some("12")), 12);
}

#[test]
fn flags_are_echoed() {
    let dir = TempDir::new().unwrap();
    let state = write_state(&dir, "s.json", &fixtures::bell_state());
    let out = run(&[
        "analyze",
        p(&state),
        "--restarts",
        "30",
        "--family-samples",
        "5",
        "--tol-neg",
        "1e-6",
        "--include-trivial",
    ]);
    let cfg = &json(&out)["config"];
    assert_eq!(cfg["restarts"], 30);
    assert_eq!(cfg["family_samples"], 5);
    assert_eq!(cfg["tol_neg"], 1e-6);
    assert_eq!(cfg["include_trivial"], true);
}

#[test]
fn other_subcommands() {
    let dir = TempDir::new().unwrap();
    let state = write_state(&dir, "bell.json", &fixtures::bell_state());
    let v = json(&run(&["norm", p(&state)]));
    assert!((v["separability_norm"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let v = json(&run(&["ppt", p(&state)]));
    assert_eq!(v["is_npt"], true);
    assert!((v["min_pt_eigenvalue"].as_f64().unwrap() + 0.5).abs() < 1e-12);
    let v = json(&run(&["sep-eigen", p(&state), "--restarts", "10"]));
    assert!(!v["solutions"].as_array().unwrap().is_empty());

    let text = run(&["analyze", p(&state), "--format", "text"]);
    assert_eq!(text.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8(text.stdout).unwrap().contains("Entangled"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(EXIT_MALFORMED));
    assert_eq!(run(&["analyze", "x", "--format", "yaml"]).status.code(), Some(EXIT_MALFORMED));
    assert_eq!(run(&["analyze", "x", "--tol-neg", "-1"]).status.code(), Some(EXIT_MALFORMED));
    assert_eq!(run(&["--version"]).status.code(), Some(EXIT_OK));
}
