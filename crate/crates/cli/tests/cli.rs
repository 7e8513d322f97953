use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lmg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmg")).args(args).env_remove("LMG_THREADS").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout_of(args: &[&str]) -> String {
    let out = lmg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn repo_config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

const MF_SMALL: &str = r#"
[grid]
j = { min = -1.5, max = 1.5, steps = 3 }
lambda = { min = 0.1, max = 0.75, steps = 2 }

[meanfield]
seeds = 16
t_transient = 100.0
t_window = 100.0
t_lyapunov = 200.0
t_lyapunov_discard = 50.0
"#;

const ED_SMALL: &str = r#"
[model]
spin = 1

[grid]
j = { min = 0.0, max = 1.0, steps = 3 }
lambda = { min = 0.0, max = 0.8, steps = 3 }
"#;

#[test]
fn mf_sweep_is_deterministic_serial_and_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mf.toml", MF_SMALL);
    let cfg = cfg.to_str().unwrap();
    let a = stdout_of(&["mf-sweep", "--config", cfg]);
    let b = stdout_of(&["mf-sweep", "--config", cfg]);
    let c = stdout_of(&["mf-sweep", "--config", cfg, "--threads", "3"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let lines: Vec<&str> = a.lines().collect();
    assert!(lines[0].starts_with("# lmg "));
    assert_eq!(lines[1], "J,lambda,class,n_stable,ZA,ZB,XA,XB,YA,YB,lyapunov");
    assert_eq!(lines.len(), 2 + 6);
    // lambda outer, J inner
    assert!(lines[2].starts_with("-1.5,0.1,"));
    assert!(lines[3].starts_with("0,0.1,fixed,1,"));
    assert!(lines[7].starts_with("1.5,0.75,"));
}

#[test]
fn ed_sweep_is_deterministic_serial_and_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ed.toml", ED_SMALL);
    let cfg = cfg.to_str().unwrap();
    let a = stdout_of(&["ed-sweep", "--config", cfg]);
    let b = stdout_of(&["ed-sweep", "--config", cfg, "--threads", "4"]);
    assert_eq!(a, b);
    let first = a.lines().nth(2).unwrap();
    // dark product state at the origin
    assert!(first.starts_with("0,0,1,-1,1,1,"), "{first}");
}

#[test]
fn env_threads_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ed.toml", ED_SMALL);
    let serial = stdout_of(&["ed-sweep", "--config", cfg.to_str().unwrap()]);
    let out = Command::new(env!("CARGO_BIN_EXE_lmg"))
        .args(["ed-sweep", "--config", cfg.to_str().unwrap()])
        .env("LMG_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), serial);
}

#[test]
fn point_commands_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pt.toml",
        "[model]\nj = 0.0\nlambda = 0.75\n[wigner]\nn_theta = 8\nn_phi = 16\n[trajectory]\nstate0 = [0.6, 0.0, 0.8, 0.0, -0.6, -0.8]\nt_final = 20.0\ndt = 0.5\n",
    );
    let cfg = cfg.to_str().unwrap();
    for cmd in ["boundaries", "wigner", "mf-trajectory"] {
        let a = stdout_of(&[cmd, "--config", cfg]);
        let b = stdout_of(&[cmd, "--config", cfg, "--threads", "2"]);
        assert_eq!(a, b, "{cmd}");
    }
    let w = stdout_of(&["wigner", "--config", cfg]);
    assert_eq!(w.lines().nth(1), Some("theta,phi,W"));
    assert_eq!(w.lines().count(), 2 + 8 * 16);
    let t = stdout_of(&["mf-trajectory", "--config", cfg]);
    assert_eq!(t.lines().nth(1), Some("t,XA,YA,ZA,XB,YB,ZB"));
    assert_eq!(t.lines().count(), 2 + 41);
}

#[test]
fn boundaries_table() {
    let text = stdout_of(&["boundaries"]);
    assert_eq!(text.lines().nth(1), Some("axis,value,boundary"));
    assert!(text.lines().any(|l| l == "lambda,0,0.625"), "{text}");
    assert!(text.lines().any(|l| l == "J,0,0.5"));
}

#[test]
fn normal_start_trajectory_is_constant() {
    let text = stdout_of(&["mf-trajectory"]);
    for line in text.lines().skip(2) {
        let (_, rest) = line.split_once(',').unwrap();
        assert_eq!(rest, "0,0,-1,0,0,1");
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let out = lmg(&["boundaries", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout_of(&["boundaries"]));
}

#[test]
fn shipped_configs_parse() {
    for name in ["example.toml", "phase-diagram.toml", "cut-a.toml", "cut-b.toml", "cut-c.toml", "cut-d.toml", "wigner-normal.toml", "wigner-lmg.toml", "wigner-pt.toml"] {
        let out = lmg(&["boundaries", "--config", &repo_config(name)]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn degenerate_points_are_flagged_not_fatal() {
    let out = lmg(&["ed-sweep", "--gamma", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(2).unwrap().ends_with(",degenerate"), "{text}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "bad.toml", "[model]\ngama = 0.5\n");
    let steps = write_config(dir.path(), "steps.toml", "[grid]\nj = { min = 0.0, max = 1.0, steps = 0 }\n");
    let off_shell = write_config(dir.path(), "shell.toml", "[trajectory]\nstate0 = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0]\nt_final = 1.0\ndt = 0.1\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["mf-sweep", "--config", unknown.to_str().unwrap()],
        vec!["mf-sweep", "--config", steps.to_str().unwrap()],
        vec!["mf-trajectory", "--config", off_shell.to_str().unwrap()],
        vec!["mf-sweep", "--config", "/nonexistent/lmg.toml"],
        vec!["ed-sweep", "--spin", "0.3"],
        vec!["ed-sweep", "--spin", "5"],
        vec!["wigner", "--gamma", "-1"],
    ];
    for args in cases {
        let out = lmg(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn aborted_runs_exit_3() {
    let out = lmg(&["boundaries", "--out", "/nonexistent-dir/b.csv"]);
    assert_eq!(out.status.code(), Some(3));
}
