use std::process::Command;

fn platoon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
}

#[test]
fn stability_check_exit_codes() {
    // Deep inside the region for tau = 0.3.
    let stable = platoon()
        .args(["stability", "check", "--lambda", "0.4", "--eta", "1.6", "--tau", "0.3"])
        .output()
        .unwrap();
    assert_eq!(stable.status.code(), Some(0), "{stable:?}");

    // Above the corner point: unstable, but the run itself succeeds.
    let unstable = platoon()
        .args(["stability", "check", "--lambda", "0.4", "--eta", "6.0", "--tau", "0.3"])
        .output()
        .unwrap();
    assert_eq!(unstable.status.code(), Some(2), "{unstable:?}");

    // Invalid input is an execution error, not a verdict.
    let bad = platoon()
        .args(["stability", "check", "--lambda", "-1", "--eta", "1.0", "--tau", "0.3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1), "{bad:?}");
}

#[test]
fn string_check_verdict_and_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = platoon()
        .args([
            "string", "check", "--k-v", "0.75", "--k-vo", "0.75", "--k-x", "0.249",
            "--k-xo", "0.228", "--headway", "0.2", "--tau", "0.3",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = std::fs::read_to_string(dir.path().join("transfer_magnitude.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "w,magnitude");
    assert!(text.lines().count() > 100);
}

#[test]
fn corpus_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = platoon()
        .args(["corpus", "run", "fig3c", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(dir.path().join("fig3c_trajectory.csv").exists());
    let manifest = std::fs::read_to_string(dir.path().join("fig3c_manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(json["scenario_id"], "fig3c");

    // The string-unstable corpus row completes but reports code 2.
    let unstable = platoon()
        .args(["corpus", "run", "fig4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(unstable.status.code(), Some(2), "{unstable:?}");
}

#[test]
fn usage_errors_exit_1() {
    let out = platoon().args(["stability", "check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let unknown = platoon().args(["corpus", "run", "nope"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1), "{unknown:?}");
}
