use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use inclusion_lab::{load_config, parse_config, presets, run, Scenario};

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let cases = [
        (Scenario::CheckHypotheses, "burgers"),
        (Scenario::Simulate, "heat"),
        (Scenario::Viability, "offcenter-ball"),
        (Scenario::Example44, "example-4-4"),
        (Scenario::Example44, "example-4-4-infeasible"),
    ];
    for (scenario, preset) in cases {
        let cfg = load_config(Some(preset), None).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = pool(1).install(|| run(&cfg, scenario, a.path())).unwrap();
        let rb = pool(4).install(|| run(&cfg, scenario, b.path())).unwrap();
        assert!(ra.pass && rb.pass, "{scenario} {preset}");
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert_eq!(fa.keys().collect::<Vec<_>>(), ra.artifacts.iter().collect::<Vec<_>>());
        assert_eq!(fa, fb, "{scenario} {preset}");
    }
}

#[test]
fn seed_changes_sampled_artifacts() {
    let mut cfg = load_config(Some("heat"), None).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&cfg, Scenario::Simulate, a.path()).unwrap();
    cfg.seed += 1;
    run(&cfg, Scenario::Simulate, b.path()).unwrap();
    assert_ne!(files(a.path())["trajectory_000.csv"], files(b.path())["trajectory_000.csv"]);
}

#[test]
fn failures_still_write_a_report() {
    // a viable expectation on a non-viable set
    let text = presets::preset("offcenter-ball").unwrap().replace("expect = \"not_viable\"", "expect = \"viable\"");
    let cfg = parse_config(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let res = run(&cfg, Scenario::Viability, dir.path()).unwrap();
    assert!(!res.pass);
    assert!(!res.criterion("viable").unwrap().pass);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(res.report_path()).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["details"]["stuck"]["t"].as_f64().unwrap() > 0.0);

    // core errors are recorded rather than raised
    let cfg = parse_config("[triple]\ndim = 3\n[cost]\nkind = \"norm_target\"\n").unwrap();
    let res = run(&cfg, Scenario::Value, dir.path()).unwrap();
    assert!(!res.pass);
    assert!(res.error.as_deref().unwrap().contains("not reducible"));
    assert!(res.report_path().exists());
}

#[test]
fn missing_sections_are_config_errors() {
    let cfg = parse_config("[triple]\ndim = 2\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    for s in [Scenario::Viability, Scenario::Value, Scenario::Example44] {
        let err = run(&cfg, s, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{s}: {err}");
    }
}

#[test]
fn binary_exit_status_reflects_the_outcome() {
    let bin = env!("CARGO_BIN_EXE_inclusion-lab");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args(["check-hypotheses", "heat", "--seed", "3", "--out"])
        .arg(dir.path().join("ok"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.contains("PASS local_monotonicity"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("ok/report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[triple]\ndim = 2\np = 2.0\nq = 3.0\n").unwrap();
    let bad = Command::new(bin).args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("triple.q"));

    let cfg = dir.path().join("fail.toml");
    let text = presets::preset("offcenter-ball").unwrap().replace("not_viable", "viable");
    std::fs::write(&cfg, text).unwrap();
    let fail = Command::new(bin)
        .args(["viability", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("fail"))
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8(fail.stderr).unwrap().contains("report.json"));

    let workers = Command::new(bin)
        .args(["simulate", "heat", "--out"])
        .arg(dir.path().join("w"))
        .env("INCLUSION_LAB_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(workers.status.code(), Some(2));
}
