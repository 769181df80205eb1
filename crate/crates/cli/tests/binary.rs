use std::path::Path;
use std::process::Command;

fn cvxnn(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cvxnn")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const PAPER: &str = "trials = 2\n[dataset]\nbuiltin = \"paper-1d\"\n[sgd]\nepochs = 100\n";

#[test]
fn compare_succeeds_and_honors_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAPER);
    let out = dir.path().join("run");
    let (code, stdout, stderr) = cvxnn(&["compare", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5", "--threads", "1"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("convex optimum"));
    assert!(stdout.contains("trial 1 (seed 7)"));
    assert!(out.join("report.json").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(dir.path(), &PAPER.replace("trials = 2", "trials = 0"));
    let (code, _, stderr) = cvxnn(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("trials"));
    let (code, _, _) = cvxnn(&["solve", "--config", "/nonexistent.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    let cfg = write_config(dir.path(), PAPER);
    let (code, _, stderr) = cvxnn(&["solve", "--config", &cfg]);
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("output directory"));
    let (code, _, _) = cvxnn(&["cnn-nuclear", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let text = format!("{PAPER}[solver]\nmax_iter = 1\npolish = false\n");
    let cfg = write_config(dir.path(), &text);
    let (code, _, stderr) = cvxnn(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["convex"]["converged"], false);
}

#[test]
fn enumerate_and_gauge_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAPER);
    let out = dir.path().join("patterns");
    let (code, stdout, _) = cvxnn(&["enumerate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("10 patterns"));
    assert!(out.join("patterns.json").exists());
    let out = dir.path().join("gauge");
    let (code, stdout, stderr) = cvxnn(&["gauge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("polar support"));
}
