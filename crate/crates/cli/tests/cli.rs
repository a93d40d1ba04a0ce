use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uplift-bench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CONFIG: &str = r#"
settings = ["A"]
n_runs = 2
models = ["S", "T", "TARNet"]
trials = 2
net_trials = 1
net_max_epochs = 3
subsample_n = 600
synthetic_n = 2000
master_seed = 5
k_list = [0.3, 0.5]
"#;

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["generate", "--setting", "Z", "--knob", "0.8", "--out", "x.csv"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn off_grid_knob_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = run(&["generate", "--setting", "A", "--knob", "0.5", "--out", s(&out), "--synthetic-n", "500"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["generate", "--setting", "A", "--knob", "0.5", "--out", s(&out), "--synthetic-n", "500", "--allow-custom-knob"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_then_evaluate_oracle_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let o = run(&["generate", "--setting", "B", "--knob", "0.5", "--seed", "3", "--out", s(&data), "--synthetic-n", "800"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("data.csv.meta.toml").exists());

    // Write the true effects as predictions.
    let mut rdr = csv::Reader::from_path(&data).unwrap();
    let h = rdr.headers().unwrap().clone();
    let tau_col = h.iter().position(|c| c == "tau").unwrap();
    let mut preds = String::from("id,tau_hat\n");
    for rec in rdr.records() {
        let rec = rec.unwrap();
        preds.push_str(&format!("{},{}\n", &rec[0], &rec[tau_col]));
    }
    let pred_path = dir.path().join("pred.csv");
    std::fs::write(&pred_path, preds).unwrap();
    let o = run(&["evaluate", "--dataset", s(&data), "--predictions", s(&pred_path), "--k", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["pehe"].as_f64(), Some(0.0));
    assert_eq!(rep["n_k"].as_u64(), Some(240));
}

#[test]
fn evaluate_reports_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = run(&["evaluate", "--dataset", s(&missing), "--predictions", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));

    let data = dir.path().join("data.csv");
    assert!(run(&["generate", "--setting", "A", "--knob", "0.8", "--out", s(&data), "--synthetic-n", "300"]).status.success());
    let pred = dir.path().join("pred.csv");
    std::fs::write(&pred, "tau_hat\n1.0\nabc\n").unwrap();
    let o = run(&["evaluate", "--dataset", s(&data), "--predictions", s(&pred)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));
    let o = run(&["evaluate", "--dataset", s(&data), "--predictions", s(&pred), "--k", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_is_deterministic_and_report_rebuilds_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["bench", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "rows.csv"));
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n:?}");
    }

    // PEHE table: 3 models x 3 knob columns plus a header.
    let pehe = std::fs::read_to_string(a.join("mean_PEHE_k0.3.csv")).unwrap();
    let lines: Vec<&str> = pehe.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "model,A:0.8,A:1.6,A:2.4");

    let rep = dir.path().join("rep");
    let o = run(&["report", "--results", s(&a), "--format", "json", "--out", s(&rep)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["models"].as_array().unwrap().len(), 3);
    let o = run(&["report", "--results", s(&a), "--format", "csv", "--out", s(&rep)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(rep.join("mean_PEHE_k0.3.csv")).unwrap(), pehe.as_bytes());
    assert_eq!(run(&["report", "--results", s(&a), "--format", "xml"]).status.code(), Some(1));
}

#[test]
fn bench_overrides_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "n_runs = 0\n").unwrap();
    let o = run(&["bench", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = dir.path().join("o");
    let o = run(&["bench", "--config", s(&cfg), "--out", s(&out), "--runs", "1", "--subsample-n", "400"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("n_runs = 1"));
    assert!(written.contains("subsample_n = 400"));
}
