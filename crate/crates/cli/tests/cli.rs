use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn astm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_astm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/example_scenario.json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn hourly_csv(path: &Path, hours: usize) {
    let mut text = String::from("timestamp,count\n");
    for h in 0..hours {
        let count = 30 + (h % 24) as i64 * 2 - if h % 24 > 12 { 20 } else { 0 };
        text.push_str(&format!(
            "2017-03-{:02}T{:02}:00:00,{count}\n",
            1 + h / 24,
            h % 24
        ));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn simulate_fixed_writes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = astm(&[
            "simulate",
            "--config",
            s(&example()),
            "--controller",
            "fixed",
            "--seed",
            "3",
            "--out",
            s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("flow rate"));
    }
    for f in [
        "vehicles.csv",
        "throughput.csv",
        "metrics.csv",
        "summary.txt",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn train_then_simulate_adaptive() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("counts.csv");
    hourly_csv(&data, 72);
    let model = dir.path().join("m/model.json");
    let o = astm(&[
        "train-forecaster",
        "--data",
        s(&data),
        "--out",
        s(&model),
        "--epochs",
        "2",
        "--hidden",
        "4",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("epoch    2"));
    let text = std::fs::read_to_string(&model).unwrap();
    assert!(text.contains("\"hidden_dim\": 4"));

    let out = dir.path().join("run");
    let o = astm(&[
        "simulate",
        "--config",
        s(&example()),
        "--controller",
        "astm",
        "--model",
        s(&model),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .starts_with("controller astm"));
}

#[test]
fn generate_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let o = astm(&[
        "generate-suite",
        "--n",
        "2",
        "--seed",
        "4",
        "--out",
        s(&suite),
    ]);
    assert!(o.status.success());
    let files: Vec<_> = std::fs::read_dir(&suite).unwrap().collect();
    assert_eq!(files.len(), 2);

    let config = dir.path().join("exp.json");
    let paths: Vec<String> = (0..2)
        .map(|i| s(&suite.join(format!("scenario_{i:03}.json"))).to_string())
        .collect();
    std::fs::write(
        &config,
        serde_json::json!({
            "scenarios": {"kind": "files", "paths": paths},
            "seeds": [1, 2],
            "fixed": {"cycle": 60.0}
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("report");
    let o = astm(&[
        "compare",
        "--config",
        s(&config),
        "--controller",
        "fixed",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let per = std::fs::read_to_string(out.join("per_scenario.csv")).unwrap();
    assert_eq!(per.lines().count(), 1 + 2 * 2 * 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reduction +0.0%"));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = astm(&["simulate", "--config", s(&missing)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        std::fs::read_to_string(example())
            .unwrap()
            .replace("300.0", "-5.0"),
    )
    .unwrap();
    let o = astm(&["simulate", "--config", s(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("negative arrival rate"));

    let o = astm(&[
        "simulate",
        "--config",
        s(&example()),
        "--controller",
        "webster",
    ]);
    assert!(!o.status.success());

    let o = astm(&["compare", "--seed", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--out"));

    let o = astm(&[
        "simulate",
        "--config",
        s(&example()),
        "--cycle",
        "10",
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
