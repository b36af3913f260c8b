use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fecf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fecf")).args(args).current_dir(dir).output().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn missing_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fecf(tmp.path(), &["explain", "--config", "nope.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("ERROR config:"));
    assert!(!tmp.path().join("res").exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"sed": 3}"#).unwrap();
    let o = fecf(tmp.path(), &["explain", "--config", "c.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn zero_threads_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fecf(tmp.path(), &["explain", "--threads", "0", "--out", "res"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fecf(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("ERROR usage:"));
}

#[test]
fn single_iteration_reports_not_converged() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"anneal": {"alpha": 0.001, "beta": {"type": "constant", "beta": 0.01}, "epsilon": 0.0001, "max_iters": 1, "seed": 0}}"#,
    )
    .unwrap();
    let o = fecf(tmp.path(), &["explain", "--config", "c.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ERROR not-converged:"));
    let trace = lines(&tmp.path().join("res/trace.csv"));
    assert_eq!(trace[0], "iter,free_energy,energy,entropy,grad_norm,alpha,accepted,uphill,score");
    assert_eq!(trace.len(), 2);
    assert!(tmp.path().join("res/result.json").exists());
    assert!(tmp.path().join("res/meta.json").exists());
}

#[test]
fn reference_explain_trace_is_bounded() {
    // The reference point under the default budget stays short of the target score.
    let tmp = tempfile::tempdir().unwrap();
    let o = fecf(tmp.path(), &["explain", "--seed", "1", "--out", "res"]);
    assert!(matches!(o.status.code(), Some(0 | 2 | 3)), "{o:?}");
    let trace = lines(&tmp.path().join("res/trace.csv"));
    assert!(trace.len() - 1 <= 500);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("res/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "explain");
    assert_eq!(meta["seed"], 1);
}

#[test]
fn landscape_has_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fecf(tmp.path(), &["landscape", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = lines(&tmp.path().join("res/landscape.csv"));
    assert_eq!(rows[0], "delta0,delta1,energy,entropy,free_energy");
    assert_eq!(rows.len() - 1, 201 * 201);
    assert!(tmp.path().join("res/meta.json").exists());
}

#[test]
fn sweep_writes_one_file_per_beta() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"sweep": {"lambdas": [0.5], "mus": [1.0], "betas": [0.1, 0.01], "seeds_per_cell": 2}}"#,
    )
    .unwrap();
    let o = fecf(tmp.path(), &["sweep", "--config", "c.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    for beta in ["0.1", "0.01"] {
        let rows = lines(&tmp.path().join(format!("res/sweep_beta_{beta}.csv")));
        assert_eq!(rows[0], "lambda,mu,stability,success_rate,dispersion");
        assert_eq!(rows.len(), 2);
        let s: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
    assert_eq!(lines(&tmp.path().join("res/sweep_curvature.csv")).len(), 3);
}

#[test]
fn sweep_rejects_duplicate_betas() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"sweep": {"lambdas": [0.5], "mus": [1.0], "betas": [0.1, 0.1], "seeds_per_cell": 2}}"#,
    )
    .unwrap();
    let o = fecf(tmp.path(), &["sweep", "--config", "c.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn iot_compare_has_row_per_feature_and_method() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"scenario": {"kind": "iot-synthetic"}, "compare": {"n_runs": 10}}"#).unwrap();
    let o = fecf(tmp.path(), &["compare", "--config", "c.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let rows = lines(&tmp.path().join("res/variability.csv"));
    assert_eq!(rows.len() - 1, 36);
    let ends = lines(&tmp.path().join("res/endpoints.csv"));
    assert_eq!(ends.len() - 1, 3 * 10 * 12);
    assert!(tmp.path().join("res/boundary.csv").exists());
    assert!(tmp.path().join("res/meta.json").exists());
}

#[test]
fn gen_data_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    for (seed, out) in [("1", "a"), ("1", "b"), ("2", "c")] {
        assert_eq!(fecf(tmp.path(), &["gen-data", "--seed", seed, "--out", out]).status.code(), Some(0));
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("data.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(lines(&tmp.path().join("a/data.csv")).len(), 1001);
}

#[test]
fn config_output_dir_is_used_and_omitted_from_meta() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"output_dir": "from_config"}"#).unwrap();
    assert_eq!(fecf(tmp.path(), &["gen-data", "--config", "c.json"]).status.code(), Some(0));
    let meta = fs::read_to_string(tmp.path().join("from_config/meta.json")).unwrap();
    assert!(!meta.contains("from_config"));
}
