use std::path::Path;
use std::process::{Command, Output};

use perturbed_pricing::cli::config::{parse_config, Overrides};
use perturbed_pricing::cli::output::{parse_trace, TRACE_HEADER};

fn pp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pp"))
        .args(args)
        .env("PP_THREADS", "0")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn short_trace_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = pp(&[
        "simulate",
        "--T",
        "3",
        "--reps",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], TRACE_HEADER);
    assert!(lines[1].starts_with("1,") && lines[1].ends_with(','));
    assert!(!lines[2].ends_with(','));

    let rows = parse_trace(&text).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][8], None);
    assert_eq!(rows[0][1], Some(1.0));
    assert!(rows[2][8].is_some());
}

#[test]
fn summary_echoes_config_and_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"T": 40, "context_dim": 3, "eta": 0.25}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = pp(&[
        "simulate",
        "--config",
        path(&cfg),
        "--eta",
        "0.375",
        "--reps",
        "3",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["eta"], 0.375);
    assert_eq!(summary["config"]["T"], 40);
    assert_eq!(summary["n_reps"], 3);
    let reps = summary["replications"].as_array().unwrap();
    assert_eq!(reps.len(), 3);
    assert_eq!(reps[0]["context_coefficients"].as_array().unwrap().len(), 3);
    assert!(summary["final"]["beta_err_sq"]["mean"].is_f64());

    // The echoed config parses back to the same effective configuration.
    let echoed = dir.path().join("echo.json");
    std::fs::write(&echoed, serde_json::to_string(&summary["config"]).unwrap()).unwrap();
    let original = parse_config(
        Some(&cfg),
        &Overrides {
            eta: Some(0.375),
            reps: Some(3),
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_eq!(
        parse_config(Some(&echoed), &Overrides::default()).unwrap(),
        original
    );
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = pp(&[
            "simulate",
            "--link",
            "logistic",
            "--T",
            "150",
            "--reps",
            "3",
            "--seed",
            "11",
            "--out",
            path(&d),
        ]);
        assert!(out.status.success());
        (
            std::fs::read(d.join("trace.csv")).unwrap(),
            std::fs::read(d.join("summary.json")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
    let other = pp(&[
        "simulate",
        "--T",
        "150",
        "--reps",
        "3",
        "--seed",
        "12",
        "--out",
        path(&dir.path().join("c")),
    ]);
    assert!(other.status.success());
    assert_ne!(
        std::fs::read(dir.path().join("a/trace.csv")).unwrap(),
        std::fs::read(dir.path().join("c/trace.csv")).unwrap()
    );
}

#[test]
fn sweep_writes_one_row_per_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = pp(&[
        "sweep",
        "--T",
        "100",
        "--reps",
        "2",
        "--etas",
        "0,0.25",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",greedy,2,"));
    assert!(lines[2].contains(",perturbed,2,"));
}

#[test]
fn invalid_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = pp(&["simulate", "--eta", "0.6", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eta") && err.contains("1/2"), "{err}");

    let out = pp(&[
        "sweep",
        "--etas",
        "0.25,0.7",
        "--T",
        "10",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"T": 10, "horizon": 5}"#).unwrap();
    let out = pp(&[
        "simulate",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = pp(&[
        "simulate",
        "--T",
        "5",
        "--reps",
        "1",
        "--out",
        path(&blocker.join("sub")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output directory"));
}

#[test]
fn verify_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    for suite in [
        "prop4",
        "fp_lemma",
        "concentration",
        "isometry",
        "mqle_oracle",
    ] {
        let out = pp(&["verify", suite, "--trials", "10", "--out", path(dir.path())]);
        assert_eq!(out.status.code(), Some(0), "{suite}");
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("verify_{suite}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(report["violations"], 0);
    }
    assert!(!pp(&["verify", "nonsense"]).status.success());
}
