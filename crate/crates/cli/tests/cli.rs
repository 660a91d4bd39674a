use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nnasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnasp")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_data_writes_header_plus_rows_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = nnasp(&["gen-data", "--kind", "xor", "--n", "1000", "--d", "10", "--seed", "3", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
}

#[test]
fn too_few_features_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = nnasp(&["gen-data", "--kind", "modified-xor", "--n", "10", "--d", "1", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("arity"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn toy_pipeline_recovers_xor() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    let model = dir.path().join("model.json");
    let program = dir.path().join("toy.lp");
    let preds = dir.path().join("preds.csv");
    let report = dir.path().join("report.json");
    let steps: [Vec<&str>; 5] = [
        vec!["gen-data", "--kind", "xor-table", "--n", "25", "--out", s(&data)],
        vec![
            "train", "--data", s(&data), "--hidden", "4,2", "--activation", "tanh", "--output-activation", "tanh",
            "--epochs", "500", "--batch-size", "4", "--learning-rate", "0.05", "--seed", "4", "--out-model", s(&model),
        ],
        vec!["extract", "--model", s(&model), "--data", s(&data), "--out-program", s(&program)],
        vec!["predict", "--program", s(&program), "--data", s(&data), "--out", s(&preds)],
        vec!["analyze", "--program", s(&program), "--data", s(&data), "--model", s(&model), "--out-report", s(&report)],
    ];
    for args in &steps {
        let o = nnasp(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    assert!(program.with_extension("json").exists());
    let text = fs::read_to_string(&program).unwrap();
    assert!(text.contains("potential_predict_output("));
    let rows: Vec<String> = fs::read_to_string(&preds).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 100);
    for row in &rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], f[2], "{row}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["program_accuracy"], 100.0);
    assert_eq!(report["fidelity"], 100.0);
}

#[test]
fn extract_rejects_data_of_the_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    let wide = dir.path().join("wide.csv");
    let model = dir.path().join("m.json");
    assert!(nnasp(&["gen-data", "--kind", "xor-table", "--n", "2", "--out", s(&toy)]).status.success());
    assert!(nnasp(&["gen-data", "--kind", "xor", "--n", "20", "--d", "5", "--seed", "1", "--out", s(&wide)]).status.success());
    let o = nnasp(&[
        "train", "--data", s(&toy), "--hidden", "3", "--epochs", "2", "--batch-size", "4", "--seed", "0", "--out-model", s(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nnasp(&["extract", "--model", s(&model), "--data", s(&wide), "--out-program", s(&dir.path().join("p.lp"))]);
    assert_eq!(o.status.code(), Some(5));
    let msg = stderr(&o);
    assert!(msg.contains('2') && msg.contains('5'), "{msg}");
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = nnasp(&[
        "predict", "--model", s(&dir.path().join("none.json")), "--data", s(&dir.path().join("none.csv")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn malformed_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, "{\"hidden\": \"four\"}").unwrap();
    let o = nnasp(&["run-experiment", s(&cfg)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("malformed config"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(nnasp(&["train", "--hidden", "4"]).status.code(), Some(2));
    assert_eq!(nnasp(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn small_experiment_reports_means_and_exports_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{
  "dataset": { "kind": "xor", "n": 200, "d": 4, "seed": 2 },
  "designs": [
    { "name": "small", "hidden": [6], "output_activation": "sigmoid",
      "train": { "epochs": 20, "batch_size": 16, "learning_rate": 0.02, "seed": 1, "optimizer": "adam" } }
  ],
  "folds": 3,
  "seed": 5,
  "report": "out/report.json",
  "csv_dir": "out/csv"
}"#,
    )
    .unwrap();
    let o = nnasp(&["run-experiment", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report_path = dir.path().join("out/report.json");
    let first = fs::read_to_string(&report_path).unwrap();
    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    let acc = &report["designs"][0]["accuracy"];
    for key in ["model_accuracy", "program_accuracy", "fidelity", "model_accuracy_std"] {
        assert!(acc[key].is_number(), "{key}: {acc}");
    }
    assert_eq!(report["designs"][0]["folds"].as_array().unwrap().len(), 3);
    let folds = fs::read_to_string(dir.path().join("out/csv/folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 4);

    assert!(nnasp(&["run-experiment", s(&cfg)]).status.success());
    assert_eq!(first, fs::read_to_string(&report_path).unwrap());
}
