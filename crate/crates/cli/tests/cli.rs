use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn nbimr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbimr")).args(args).env_remove("NBIMR_OUT_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = nbimr(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small dataset and model shared by the tests that only read them.
fn fixture() -> &'static (tempfile::TempDir, PathBuf, PathBuf) {
    static F: OnceLock<(tempfile::TempDir, PathBuf, PathBuf)> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.csv");
        let model = dir.path().join("model.json");
        ok(&[
            "gen-dataset",
            "--reps",
            "6",
            "--j2s-steps",
            "4",
            "--seed",
            "1",
            "--bits",
            "2000",
            "--quiet",
            "--out",
            s(&data),
        ]);
        ok(&["train", "--data", s(&data), "--trees", "10", "--seed", "2", "--model-out", s(&model)]);
        (dir, data, model)
    })
}

#[test]
fn single_cell_dataset_has_two_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = ok(&[
            "gen-dataset",
            "--reps",
            "1",
            "--j2s-steps",
            "1",
            "--seed",
            "5",
            "--bits",
            "2000",
            "--quiet",
            "--out",
            s(p),
        ]);
        assert!(out.contains("wrote 2 records"), "{out}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nbimr"))
        .args(["gen-dataset", "--reps", "1", "--j2s-steps", "1", "--seed", "5", "--bits", "2000", "--quiet"])
        .env("NBIMR_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("dataset.csv").exists());
}

#[test]
fn training_on_missing_data_fails_without_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let missing = dir.path().join("nope.csv");
    let out = nbimr(&["train", "--data", s(&missing), "--seed", "1", "--model-out", s(&model)]);
    assert!(!out.status.success());
    assert!(!model.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn recommend_json_has_five_bers() {
    let (_, _, model) = fixture();
    let out = ok(&[
        "recommend",
        "--model",
        s(model),
        "--j2s",
        "-3",
        "--interference",
        "chirp",
        "--chirp-rate",
        "2e5",
        "--json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    let ber = doc["predicted_ber"].as_object().unwrap();
    assert_eq!(ber.len(), 5);
    assert!(ber.values().all(|v| (0.0..=0.5).contains(&v.as_f64().unwrap())));
    assert!(doc["chosen"].is_string() && doc["warning"].is_boolean());
    assert_eq!(doc["table_choice"], "FRFT");
}

#[test]
fn tone_on_narrowband_gets_notch_baseline() {
    let (_, _, model) = fixture();
    let out = ok(&["recommend", "--model", s(model), "--j2s", "5", "--interference", "tone", "--tone-freq", "7000"]);
    assert!(out.lines().any(|l| l == "table baseline: Notch"), "{out}");
    assert!(!out.starts_with("recommended: Transversal"));
}

#[test]
fn recommend_reads_meta_file() {
    let (dir, _, model) = fixture();
    let meta = dir.path().join("meta.json");
    std::fs::write(
        &meta,
        r#"{"modulation_rank": 2, "j2s_db": 1.0, "snr_db": 9.0, "interference_type": "None", "duty_cycle": 1.0,
            "tone_freq_hz": null, "chirp_rate": null, "mod_bps": null, "mod_sps": null, "mod_bw_ratio": null,
            "fnoise_bw_ratio": null, "is_dsss": true}"#,
    )
    .unwrap();
    let out = ok(&["recommend", "--model", s(model), "--meta-file", s(&meta)]);
    assert!(out.contains("table baseline: Unmitigated"), "{out}");
}

#[test]
fn invalid_scenarios_are_usage_errors() {
    let (_, _, model) = fixture();
    let out = nbimr(&["recommend", "--model", s(model), "--j2s", "15", "--interference", "none"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nbimr(&["recommend", "--model", s(model), "--j2s", "0", "--interference", "tone"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nbimr(&["recommend", "--model", s(model), "--j2s", "0", "--interference", "laser"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_writes_outputs() {
    let (_, data, model) = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&["eval", "--model", s(model), "--data", s(data), "--out-dir", s(dir.path())]);
    for name in [
        "scatter_unmitigated.csv",
        "scatter_filterbank.csv",
        "scatter_transversal.csv",
        "scatter_notch.csv",
        "scatter_frft.csv",
        "error_histogram.csv",
        "rmse_vs_j2s.csv",
        "importance.csv",
        "system.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let imp: Vec<f64> = summary["importance"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(imp.len(), 14);
    assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // 48 records with a 20% held-out split.
    assert!(summary["num_records"].as_u64().unwrap() < 48);
}

#[test]
fn importance_json_sums_to_one() {
    let (_, _, model) = fixture();
    let doc: serde_json::Value = serde_json::from_str(&ok(&["importance", "--model", s(model), "--json"])).unwrap();
    let combined: Vec<f64> = doc["combined"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(combined.len(), doc["feature_names"].as_array().unwrap().len());
    assert!((combined.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(doc["per_target"].as_object().unwrap().len(), 5);
}
