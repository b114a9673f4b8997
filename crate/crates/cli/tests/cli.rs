use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctrw-harmonic"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
alpha = 0.5
n_paths = 500
scale_c = [100.0]
[grids]
x = [-1.0, 0.0, 1.0]
t = [0.0, 0.5, 2.0]
"#;

#[test]
fn list_names_every_experiment() {
    let out = run(&["--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "fl-symbol",
        "ctrw-converge",
        "q-fields",
        "residual-scan",
        "laplace-checks",
        "pmp-probe",
        "identities",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn alpha_out_of_range_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "alpha = 1.5\n");
    let out = run(&[
        "q-fields",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("`alpha`"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_keys_and_missing_files_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "alpah = 0.5\n");
    let out = run(&["identities", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("alpah"));

    let out = run(&[
        "identities",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["no-such-experiment"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_config_and_seed_give_identical_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (exp, check_outputs) in [
        ("q-fields", true),
        ("ctrw-converge", true),
        ("fl-symbol", true),
    ] {
        for out_dir in [&a, &b] {
            let o = run(&[
                exp,
                "--config",
                &cfg,
                "--out",
                out_dir.to_str().unwrap(),
                "--seed",
                "11",
            ]);
            assert!(o.status.code().is_some_and(|c| c <= 1), "{exp}: {o:?}");
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
        let outputs = manifest["outputs"].as_array().unwrap();
        assert_eq!(outputs.is_empty(), !check_outputs);
        for name in outputs {
            let name = name.as_str().unwrap();
            assert_eq!(
                fs::read(a.join(name)).unwrap(),
                fs::read(b.join(name)).unwrap(),
                "{name}"
            );
        }
        let mb: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_hash"], mb["config_hash"]);
    }
}

#[test]
fn different_seeds_change_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&[
        "fl-symbol",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    run(&[
        "fl-symbol",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_ne!(
        fs::read(a.join("symbol.csv")).unwrap(),
        fs::read(b.join("symbol.csv")).unwrap()
    );
}

#[test]
fn manifest_records_checks_and_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "alpha = [0.5]\nlambda = [1.0]\n");
    let out_dir = dir.path().join("o");
    let o = run(&[
        "identities",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "identities");
    assert_eq!(m["pass"], true);
    assert!(m["error"].is_null());
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["csv_schemas"]["identities"]
        .as_str()
        .unwrap()
        .ends_with("name,alpha,param,residual,bound"));
    let checks = m["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true));

    let csv = fs::read_to_string(out_dir.join("identities.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "name,alpha,param,residual,bound"
    );
}

#[test]
fn residual_csv_has_the_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("kinds = [\"overshoot\"]\n{SMALL}"));
    let out_dir = dir.path().join("o");
    let o = run(&[
        "residual-scan",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = fs::read_to_string(out_dir.join("residual_overshoot_a0.5.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "kind,alpha,x,t,residual,bound,pass"
    );
    // t = 0 is dropped from scans
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}
