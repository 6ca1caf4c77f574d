use std::path::{Path, PathBuf};

use genbound::cli::run;
use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples/data")
        .join(name)
        .display()
        .to_string()
}

fn run_to(args: &[&str], out: &Path) -> i32 {
    let mut argv = vec!["genbound".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(["--out".to_string(), out.display().to_string()]);
    run(argv)
}

fn read_json(p: &PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn theorem_on_single_relu_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let net = data("relu_l1.toml");
    assert_eq!(
        run_to(
            &["rademacher", "theorem", "--network", &net, "--n", "100"],
            &out
        ),
        0
    );
    let v = read_json(&out);
    assert_eq!(v["command"], "rademacher theorem");
    let b = v["result"]["bound"]["value"].as_f64().unwrap();
    assert!((b - 0.17320508075688773).abs() < 1e-15);
}

#[test]
fn two_state_chain_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let chain = data("two_state.toml");
    assert_eq!(run_to(&["chain", "analyze", "--chain", &chain], &out), 0);
    let r = &read_json(&out)["result"]["analysis"];
    assert!((r["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!((r["pi"][0].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn bound_reports_write_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let (net, csv, chain) = (
        data("threshold.toml"),
        data("threshold_data.csv"),
        data("two_state.toml"),
    );
    assert_eq!(
        run_to(&["bound", "iid", "--network", &net, "--data", &csv], &out),
        0
    );
    let iid = read_json(&out)["result"]["bound_value"].as_f64().unwrap();
    assert!(out.with_extension("csv").exists());
    assert_eq!(
        run_to(
            &[
                "bound",
                "markov",
                "--network",
                &net,
                "--data",
                &csv,
                "--chain",
                &chain
            ],
            &out
        ),
        0
    );
    let r = &read_json(&out)["result"];
    assert!(r["bound_value"].as_f64().unwrap() >= iid.min(1.0) - 1e-12);
    assert!(r["bound_value"].as_f64().unwrap() <= 1.0);
}

#[test]
fn missing_input_is_invalid_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let missing = dir.path().join("nope.toml").display().to_string();
    assert_eq!(run_to(&["chain", "analyze", "--chain", &missing], &out), 2);
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_override_and_bad_flag_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let cfg = data("experiment.toml");
    assert_eq!(
        run_to(
            &[
                "config",
                "check",
                "--config",
                &cfg,
                "--set",
                "bound.nonsense=1"
            ],
            &out
        ),
        2
    );
    assert_eq!(
        run_to(
            &[
                "config",
                "check",
                "--config",
                &cfg,
                "--set",
                "bound.delta=1.5"
            ],
            &out
        ),
        2
    );
    assert_eq!(run_to(&["verify", "margin", "--trials", "0"], &out), 2);
    assert_eq!(run(["genbound", "frobnicate"]), 2);
    assert!(!out.exists());
}

#[test]
fn config_driven_verifications() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let (cfg, chain) = (data("experiment.toml"), data("two_state.toml"));
    assert_eq!(
        run_to(
            &[
                "verify",
                "coverage",
                "--config",
                &cfg,
                "--set",
                "coverage.trials=100"
            ],
            &out
        ),
        0
    );
    assert_eq!(read_json(&out)["seed"], 2024);
    assert_eq!(
        run_to(
            &["verify", "mse", "--config", &cfg, "--chain", &chain],
            &out
        ),
        0
    );
    assert_eq!(run_to(&["config", "check", "--config", &cfg], &out), 0);
}

#[test]
fn exact_rademacher_from_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let table = data("hypotheses.csv");
    assert_eq!(run_to(&["rademacher", "exact", "--table", &table], &out), 0);
    let exact = read_json(&out)["result"]["estimate"]["value"]
        .as_f64()
        .unwrap();
    assert_eq!(
        run_to(
            &[
                "rademacher",
                "mc",
                "--table",
                &table,
                "--draws",
                "200000",
                "--seed",
                "3"
            ],
            &out
        ),
        0
    );
    let r = &read_json(&out)["result"]["estimate"];
    let (mc, se) = (
        r["value"].as_f64().unwrap(),
        r["std_error"].as_f64().unwrap(),
    );
    assert!((mc - exact).abs() <= 5.0 * se + 1e-12);
}
