use std::path::Path;
use std::process::Command;

use fedcme::metrics::{read_metrics, CSV_HEADER};

fn fedcme() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedcme"))
}

fn write_config(dir: &Path, strategy: &str, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("{strategy}.json"));
    let out = dir.join(format!("{strategy}.csv"));
    let text = format!(
        r#"{{
            "strategy": "{strategy}", "k": 6, "m": 4, "t": 5, "seed": {seed},
            "local_epochs": 2, "dirichlet_alpha": 0.5, "hidden": [16, 8],
            "output_path": {out:?},
            "dataset": {{"blobs": {{"classes": 4, "dim": 6, "train_per_class": 30,
                                   "test_per_class": 10, "spread": 0.8}}}}
        }}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_metrics_and_compare_summarises() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for strategy in ["fedavg", "fedcme"] {
        let cfg = write_config(dir.path(), strategy, 3);
        let out = fedcme()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--workers", "2"])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("final_test_acc="), "{stdout}");

        let csv = dir.path().join(format!("{strategy}.csv"));
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
        let records = read_metrics(&csv).unwrap();
        assert_eq!(
            records.iter().map(|r| r.round).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
        assert!(records
            .iter()
            .all(|r| r.strategy == strategy && r.seed == 3));
        csvs.push(csv);
    }

    let out = fedcme().arg("compare").args(&csvs).output().unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(
        table.contains("fedavg") && table.contains("fedcme"),
        "{table}"
    );
}

#[test]
fn sweep_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fedprox", 0);
    let out = fedcme()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--sweep", "seeds=4..6"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for seed in 4..=6 {
        let records = read_metrics(dir.path().join(format!("fedprox_seed{seed}.csv"))).unwrap();
        assert!(records.iter().all(|r| r.seed == seed));
    }
}

#[test]
fn bad_config_fails_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"strategy": "fedavg", "k": 4, "m": 2, "t": 1, "lr": "fast", "dataset": {"blobs": {}}}"#,
    )
    .unwrap();
    let out = fedcme()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("lr"), "{stderr}");
}

#[test]
fn compare_rejects_mismatched_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(
        &a,
        format!("{CSV_HEADER}\n1,0.5,1.0,2,fedavg,0\n2,0.6,0.9,2,fedavg,0\n"),
    )
    .unwrap();
    std::fs::write(&b, format!("{CSV_HEADER}\n1,0.5,1.0,2,fedavg,1\n")).unwrap();
    let out = fedcme().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert!(!out.status.success());
}
