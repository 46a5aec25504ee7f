use std::process::Command;

fn dsme() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsme"))
}

#[test]
fn simulate_writes_csv_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dsme()
        .args(["simulate", "--horizon", "3", "--seed", "1"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("steps=3 sensors=5 seed=1"));
    assert!(stdout.contains("containment_rate=1.0000"));
    for name in ["states.csv", "triggers.csv", "ellipsoids.csv", "gains.csv", "summary.csv"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn privacy_budget_prints_epsilon() {
    let out = dsme()
        .args([
            "privacy-budget",
            "--varsigma",
            "1",
            "--c",
            "1",
            "--q",
            "0.9",
            "--a-hat",
            "0.5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("epsilon=2.25"), "got {stdout}");
}

#[test]
fn undefined_budget_exits_2() {
    let out = dsme()
        .args([
            "privacy-budget",
            "--varsigma",
            "1",
            "--c",
            "1",
            "--q",
            "0.5",
            "--a-hat",
            "0.9",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_error_exits_3() {
    let out = dsme()
        .args(["check-lmi", "--step", "1000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the horizon"));
}

#[test]
fn steady_state_reports_contraction() {
    let out = dsme().arg("steady-state").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("converged=true"), "got {stdout}");
}
