//! The `kphd` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn kphd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kphd")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn divergence_and_fuse_print_json() {
    let o = kphd(&["divergence", "--p", "2,2", "--q", "3,1", "--kind", "kl"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["divergence"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);

    let o = kphd(&["fuse", "--opinion", "0.6,0.2,0.2", "--opinion", "0.4,0.4,0.2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["uncertainty"].as_f64().unwrap() - 0.04 / 0.68).abs() < 1e-12);
    assert!((v["conflicts"][0].as_f64().unwrap() - 0.32).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    write(&bad, "train.learning_rate = \"fast\"\n");
    let o = kphd(&["--config", bad.to_str().unwrap(), "ablate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.learning_rate"));

    let o = kphd(&["divergence", "--p", "0.1,0.1", "--q", "3,1", "--alpha-h", "2", "--gamma", "2"]);
    assert_eq!(o.status.code(), Some(3));

    let o = kphd(&["fuse", "--opinion", "1,0,0", "--opinion", "0,1,0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conflict"));
}

#[test]
fn train_then_eval_from_csv() {
    use kphd_harness::dataset::write_dataset;
    use kphd_harness::synthetic::{generate_synthetic, SyntheticConfig};

    let dir = tempfile::tempdir().unwrap();
    let (train, test) = generate_synthetic(&SyntheticConfig {
        n_train: 120,
        n_test: 60,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let train_csv = dir.path().join("train.csv");
    let test_csv = dir.path().join("test.csv");
    write_dataset(&train, std::fs::File::create(&train_csv).unwrap()).unwrap();
    write_dataset(&test, std::fs::File::create(&test_csv).unwrap()).unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, "train.epochs = 15\n");
    let out = dir.path().join("out");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    let o = kphd(&["--config", cfg, "--out", out, "train", "--data", train_csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = Path::new(out).join("model.kphd");
    assert!(model.exists() && Path::new(out).join("trace.json").exists());

    let o = kphd(&["--config", cfg, "--out", out, "eval", "--model", model.to_str().unwrap(), "--data", test_csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["accuracy"].as_f64().unwrap() > 0.9, "{v}");
}

#[test]
fn grid_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, "data.n_train = 60\ndata.n_test = 30\ntrain.epochs = 1\n");
    let out = dir.path().join("grid");
    let o = kphd(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "grid"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 36);
    let ids: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids[0], "grid-a1.1-g0.5");
    assert_eq!(ids[35], "grid-a2.5-g2");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 36);
}
