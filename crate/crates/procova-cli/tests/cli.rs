//! End-to-end binary tests: schema validation, exit codes, report shape and
//! byte-level stability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_procova")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_fit(trial: &str, hist: &str, extra: &[&str]) -> Output {
    let trial = fixture(trial);
    let hist = fixture(hist);
    let mut args = vec!["fit", trial.to_str().unwrap(), hist.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn fit_matches_golden_report() {
    let out = run_fit("trial.csv", "historical.csv", &[]);
    assert!(out.status.success());
    let golden = std::fs::read(fixture("golden_fit_report.json")).unwrap();
    assert_eq!(out.stdout, golden, "report bytes diverged from the golden file");
}

#[test]
fn fit_report_values_equal_library_fit() {
    use procova_core::{fit_procova, fit_prognostic, summarize, ModelSpec};

    let out = run_fit("trial.csv", "historical.csv", &[]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    // Recompute through the library on the same data.
    let parse = |name: &str| -> (Vec<Vec<f64>>, Vec<String>) {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
        let rows = lines
            .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
            .collect();
        (rows, header)
    };
    let (trial_rows, _) = parse("trial.csv");
    let (hist_rows, _) = parse("historical.csv");
    let trial = procova_core::TrialDataset::new(
        procova_core::Matrix::from_rows(
            &trial_rows.iter().map(|r| {
                let mut w = vec![1.0];
                w.extend_from_slice(&r[2..]);
                w
            }).collect::<Vec<_>>(),
        )
        .unwrap(),
        trial_rows.iter().map(|r| r[1] as u8).collect(),
        procova_core::Vector::new(trial_rows.iter().map(|r| r[0]).collect()).unwrap(),
    )
    .unwrap();
    let hist = procova_core::HistoricalDataset::new(
        procova_core::Matrix::from_rows(
            &hist_rows.iter().map(|r| {
                let mut w = vec![1.0];
                w.extend_from_slice(&r[1..]);
                w
            }).collect::<Vec<_>>(),
        )
        .unwrap(),
        procova_core::Vector::new(hist_rows.iter().map(|r| r[0]).collect()).unwrap(),
    )
    .unwrap();
    let prog = fit_prognostic(&hist).unwrap();
    let fit = fit_procova(&trial, &prog, ModelSpec::Ancova).unwrap();
    let rows = summarize(&fit, 0.95).unwrap();

    let coeffs = report["coefficients"].as_array().unwrap();
    assert_eq!(coeffs.len(), rows.len());
    for (c, r) in coeffs.iter().zip(&rows) {
        assert_eq!(c["label"].as_str().unwrap(), r.coefficient_label);
        assert_eq!(c["estimate"].as_f64().unwrap(), r.estimate);
        assert_eq!(c["se_fix"].as_f64().unwrap(), r.se_fix);
        assert_eq!(c["se_est"].as_f64().unwrap(), r.se_est);
        assert_eq!(c["ci_fix"][0].as_f64().unwrap(), r.ci_fix.0);
        assert_eq!(c["ci_est"][1].as_f64().unwrap(), r.ci_est.1);
        assert_eq!(c["df"].as_u64().unwrap() as usize, r.df);
    }
    assert_eq!(report["kappa_hat"].as_f64().unwrap(), fit.kappa_hat());
}

#[test]
fn fit_report_round_trips_byte_identically() {
    let out = run_fit("trial.csv", "historical.csv", &[]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut reserialized = serde_json::to_string_pretty(&value).unwrap();
    reserialized.push('\n');
    assert_eq!(out.stdout, reserialized.into_bytes());
}

#[test]
fn noiseless_fit_recovers_effect_with_zero_standard_errors() {
    let out = run_fit("trial_noiseless.csv", "historical_noiseless.csv", &[]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let coeffs = report["coefficients"].as_array().unwrap();
    let beta_a = coeffs.iter().find(|c| c["label"] == "betaA").unwrap();
    assert!((beta_a["estimate"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    for c in coeffs {
        assert!(c["se_fix"].as_f64().unwrap() < 1e-10);
        assert!(c["se_est"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn historical_treatment_column_is_never_read() {
    // The spurious column even contains an unparsable-as-treatment value;
    // the report must be byte-identical to the one without the column.
    let base = run_fit("trial.csv", "historical.csv", &[]);
    let with_a = run_fit("trial.csv", "historical_with_a.csv", &[]);
    assert!(with_a.status.success());
    assert_eq!(base.stdout, with_a.stdout);
}

#[test]
fn invalid_treatment_value_is_schema_error() {
    let out = run_fit("trial_bad_treatment.csv", "historical.csv", &[]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("'a'") && msg.contains("row 2"), "diagnostic: {msg}");
}

#[test]
fn missing_file_is_input_error() {
    let out = run_fit("nope.csv", "historical.csv", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_and_nan_cells_are_schema_errors() {
    let dir = std::env::temp_dir().join(format!("procova-cells-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let hist = fixture("historical.csv");
    for (name, row, needle) in [
        ("empty.csv", "2.0,1,,0.2", "empty cell"),
        ("nan.csv", "2.0,1,NaN,0.2", "non-finite"),
    ] {
        let trial = dir.join(name);
        std::fs::write(
            &trial,
            format!("y,a,w1,w2\n1.0,0,0.5,1.0\n{row}\n1.5,1,-0.3,0.8\n"),
        )
        .unwrap();
        let out = run(&["fit", trial.to_str().unwrap(), hist.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let msg = String::from_utf8_lossy(&out.stderr);
        assert!(
            msg.contains(needle) && msg.contains("w1") && msg.contains("row 2"),
            "{name} diagnostic: {msg}"
        );
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn mismatched_covariate_names_is_schema_error() {
    // Historical columns don't match the trial covariates.
    let out = run_fit("trial.csv", "historical_wrong_names.csv", &[]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("w3"), "diagnostic should name the column: {msg}");
}

#[test]
fn bad_level_is_input_error() {
    let out = run_fit("trial.csv", "historical.csv", &["--level", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_fit("trial.csv", "historical.csv", &["--level", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_arm_trial_is_estimation_failure() {
    let dir = std::env::temp_dir().join(format!("procova-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let trial = dir.join("single_arm.csv");
    std::fs::write(
        &trial,
        "y,a,w1,w2\n1.0,1,0.5,1.0\n2.0,1,0.1,0.2\n1.5,1,-0.3,0.8\n2.1,1,0.9,0.4\n",
    )
    .unwrap();
    let hist = fixture("historical.csv");
    let out = run(&["fit", trial.to_str().unwrap(), hist.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arm"));
}

#[test]
fn fit_csv_format() {
    let out = run_fit("trial.csv", "historical.csv", &["--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("label,estimate,se_fix"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn anhecova_fit_has_four_coefficients_plus_combination() {
    let out = run_fit("trial.csv", "historical.csv", &["--model", "anhecova"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let labels: Vec<&str> = report["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["beta0", "betaA", "beta1", "beta2", "beta0+betaA"]);
}

#[test]
fn check_passes_on_default_and_strict_profiles() {
    for profile in ["default", "strict"] {
        let out = run(&["check", "--profile", profile]);
        assert_eq!(out.status.code(), Some(0), "profile {profile}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("[PASS]"));
        assert!(!text.contains("[FAIL]"));
    }
}

#[test]
fn check_fails_when_cross_derivative_perturbed() {
    let out = run(&["check", "--perturb-q1", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[FAIL]"));
    assert!(text.contains("max discrepancy"));
}

#[test]
fn check_rejects_unknown_profile() {
    let out = run(&["check", "--profile", "lenient"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_rejects_small_trials_and_bad_scenarios() {
    let out = run(&[
        "simulate", "--scenario", "A", "--shift", "1", "--n", "5", "--n-hist", "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate", "--scenario", "E", "--shift", "1", "--n", "50", "--n-hist", "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate", "--scenario", "A", "--shift", "12", "--n", "50", "--n-hist", "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_with_unidentifiable_first_stage_is_estimation_failure() {
    // 8 historical rows cannot identify 8 prognostic coefficients.
    let out = run(&[
        "simulate", "--scenario", "A", "--shift", "1", "--n", "40", "--n-hist", "8",
        "--reps", "3", "--seed", "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_stdout_formats() {
    let args = [
        "simulate", "--scenario", "A", "--shift", "2", "--n", "40", "--n-hist", "80",
        "--reps", "5", "--seed", "11",
    ];
    let json = run(&args);
    assert!(json.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(parsed["rng"], "chacha8");
    assert_eq!(parsed["config"]["outcome_model"], "A");
    assert_eq!(parsed["metrics"]["replications_completed"], 5);

    let mut csv_args = args.to_vec();
    csv_args.extend_from_slice(&["--format", "csv"]);
    let csv = run(&csv_args);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("scenario,shift,model,"));
    // One row per coefficient and estimator.
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}
