use std::path::Path;

use w1clt::cli::run;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("w1clt").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn check_threshold_converges() {
    let (code, out, _) = call(&["check", "--gamma", "0.25", "--a", "0.2"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["verdict"], "converges");
    let (_, out, _) = call(&["check", "--gamma", "0.25", "--a", "0.3"]);
    assert_eq!(json(&out)["verdict"], "diverges");
}

#[test]
fn check_reads_condition_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cond.json");
    write(
        &path,
        r#"{"kind": "linear", "coefficients": {"kind": "polynomial", "beta": 1.5, "offset": 1},
            "innovation": {"kind": "uniform", "lo": -1, "hi": 1}, "mode": "tail", "r": 4, "terms": 200}"#,
    );
    let (code, out, err) = call(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&out)["verdict"], "diverges");
    write(
        &path,
        r#"{"kind": "phi", "bound": {"kind": "phi_geometric", "c1": 1, "rho": 0.5}, "model": {"kind": "exponential", "rate": 1}}"#,
    );
    let (code, out, _) = call(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["verdict"], "converges");
}

#[test]
fn w1_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write(&a, "value\n0.3\n1.7\n-2\n");
    let (code, out, _) = call(&["w1", "--x", a.to_str().unwrap(), "--y", a.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["w1"]["value"], 0.0);
    let m = dir.path().join("m.json");
    write(&m, r#"{"kind": "uniform", "lo": 0, "hi": 1}"#);
    write(&a, "value\n0.5\n");
    let (code, out, _) = call(&["w1", "--x", a.to_str().unwrap(), "--model", m.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((json(&out)["w1"]["value"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn usage_and_validation_errors_exit_one() {
    let (code, _, err) = call(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"));
    let (code, _, _) = call(&["check", "--gamma", "1.5", "--a", "0.1"]);
    assert_eq!(code, 1);
    let (code, _, err) = call(&["experiment", "--config", "/nonexistent/exp.json"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("experiment"));
}

#[test]
fn numerical_failures_exit_two() {
    // A model sample with infinite mean against a point sample has no finite W1.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    write(
        &cfg,
        r#"{"schema_version": 1, "process": {"kind": "iid", "model": {"kind": "pareto_tail", "scale": 1, "exponent": 0.8}},
            "n_values": [10], "replications": 2, "base_seed": 1, "reference": {"kind": "analytic"}}"#,
    );
    let (code, _, err) = call(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn experiment_then_compare_matches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    write(
        &cfg,
        r#"{"schema_version": 1, "process": {"kind": "iid", "model": {"kind": "uniform", "lo": 0, "hi": 1}},
            "n_values": [20, 200], "replications": 50, "base_seed": 3, "reference": {"kind": "analytic"},
            "grid": {"size": 64, "scheme": "quantile"}, "limit": {"replications": 400, "oracle_mesh": 64}}"#,
    );
    let out_dir = dir.path().join("out");
    let od = out_dir.to_str().unwrap();
    let (code, out, err) = call(&["experiment", "--config", cfg.to_str().unwrap(), "--out-dir", od, "--threads", "2"]);
    assert_eq!(code, 0, "{err}");
    let report = json(&out);
    for f in ["tn_n20.csv", "tn_n200.csv", "limit.csv", "oracle.csv", "report.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let (code, cmp, _) = call(&[
        "compare",
        "--a",
        out_dir.join("tn_n20.csv").to_str().unwrap(),
        out_dir.join("tn_n200.csv").to_str().unwrap(),
        "--b",
        out_dir.join("limit.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let cmp = json(&cmp);
    assert_eq!(cmp["ks_two_sample"], report["comparison"]["ks_two_sample"]);
    assert_eq!(cmp["w1_between_statistics"], report["comparison"]["w1_between_statistics"]);
    assert_eq!(cmp["per_n"][0]["n"], 20);

    let (code, text, _) = call(&["report", "--dir", od]);
    assert_eq!(code, 0);
    assert!(text.contains("limit"));
    let table = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);

    // --seed overrides the config and changes the draws.
    let (_, other, _) = call(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "4"]);
    assert_ne!(json(&other)["per_n"][0]["mean"], report["per_n"][0]["mean"]);
}

#[test]
fn generate_writes_a_reproducible_path() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    write(&spec, r#"{"kind": "intermittent_map", "gamma": 0.25, "observable_exponent": 0.1}"#);
    let args = ["generate", "--config", spec.to_str().unwrap(), "--n", "100", "--seed", "5"];
    let (code, a, _) = call(&args);
    assert_eq!(code, 0);
    let (_, b, _) = call(&args);
    assert_eq!(a, b);
    let values = w1clt::io::parse_values(&a).unwrap();
    assert_eq!(values.len(), 100);
    assert!(values.iter().all(|&v| v >= 1.0));
    assert!(a.contains("# seed: 5"));
}

#[test]
fn probe_and_limit_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let od = dir.path().to_str().unwrap();
    let (code, out, err) = call(&[
        "probe", "--gamma", "0.25", "--a", "0.1", "--n", "256", "1024", "--replications", "10", "--out-dir", od,
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&out)["per_n"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("probe.json").exists());
    assert!(dir.path().join("probe_n1024.csv").exists());

    let cfg = dir.path().join("exp.json");
    write(
        &cfg,
        r#"{"schema_version": 1, "process": {"kind": "doubling_map", "observable_exponent": 0.25},
            "n_values": [100], "replications": 2, "base_seed": 3, "reference": {"kind": "analytic"},
            "grid": {"size": 16, "scheme": "quantile"},
            "limit": {"replications": 50, "sim_length": 20000, "write_covariance": true}}"#,
    );
    let (code, out, err) = call(&["limit", "--config", cfg.to_str().unwrap(), "--out-dir", od]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&out)["limit"]["lag_cutoff"], 10);
    assert!(dir.path().join("covariance.json").exists());
    assert!(dir.path().join("limit.csv").exists());
}
