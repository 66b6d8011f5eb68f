use std::path::Path;
use std::process::Command as Process;

use kummer_k3::cli::{main_with_args, Command, Flags, Report, RunConfig};
use serde_json::Value;

fn bin(args: &[&str]) -> (i32, String, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_kummer-k3")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let full: Vec<&str> = std::iter::once("kummer-k3").chain(args.iter().copied()).collect();
    let code = main_with_args(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn report(path: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &tempfile::TempDir) -> String {
    dir.path().to_str().unwrap().to_owned()
}

#[test]
fn verify_eh_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = bin(&["verify-eh", "--out", &out_arg(&dir)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let r = report(&dir.path().join("verify_eh.json"));
    assert!(r.pass);
    assert!(r.checks.len() >= 6);
    assert!(r.checks.iter().all(|c| c.pass && c.max_residual <= c.tolerance));
    assert!(stdout.lines().all(|l| l.starts_with("PASS ") || l.starts_with("note: ")));
}

#[test]
fn sigma2_sign_error_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = bin(&["verify-eh", "--out", &out_arg(&dir), "--inject-sigma2-sign-error"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("sigma_structure_equations"));
    let r = report(&dir.path().join("verify_eh.json"));
    assert!(!r.pass);
    assert!(r.checks.iter().any(|c| c.check == "sigma_structure_equations" && !c.pass));
}

#[test]
fn verify_gh_passes_and_skips_isometry_off_the_eh_case() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&["verify-gh", "--out", &out_arg(&dir)]);
    assert_eq!(code, 0);
    let r = report(&dir.path().join("verify_gh.json"));
    assert!(r.checks.iter().any(|c| c.check == "isometry_with_eguchi_hanson"));

    let (code, stdout, _) = run(&["verify-gh", "--out", &out_arg(&dir), "--eps-gh", "1"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("note:"));
    let r = report(&dir.path().join("verify_gh.json"));
    assert!(r.checks.iter().all(|c| c.check != "isometry_with_eguchi_hanson"));
}

#[test]
fn invalid_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(&dir);
    for args in [
        vec!["verify-gh", "--c", "0", "--out", &o],
        vec!["solve", "--alpha", "0.4", "--out", &o],
        vec!["solve", "--a", "0.3", "--out", &o],
        vec!["solve", "--grid-n", "7", "--out", &o],
        vec!["solve", "--tol", "0", "--out", &o],
        vec!["verify-eh", "--a", "-1", "--out", &o],
        vec!["no-such-command"],
    ] {
        let (code, _, stderr) = bin(&args);
        assert_eq!(code, 2, "{args:?}: {stderr}");
        assert!(!stderr.is_empty());
    }
}

#[test]
fn help_exits_zero() {
    let (code, stdout, _) = bin(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["verify-eh", "verify-gh", "scaling", "solve", "lambda1", "uniqueness"] {
        assert!(stdout.contains(sub));
    }
}

#[test]
fn scaling_writes_csv_with_slopes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scaling", "--out", dir.path().to_str().unwrap()];
    assert_eq!(run(&args).0, 0);
    let first = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(run(&args).0, 0);
    let second = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(first, second);
    let mut lines = first.lines();
    assert_eq!(lines.next(), Some("a,sup_ea,y_norm_ea,lambda"));
    let rows: Vec<_> = lines.clone().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        for field in row.split(',') {
            let digits: String = field.chars().take_while(|c| *c != 'e').filter(|c| c.is_ascii_digit()).collect();
            assert_eq!(digits.len(), 17, "{field}");
        }
    }
    let footer = lines.find(|l| l.starts_with("# ")).unwrap();
    let slopes: Value = serde_json::from_str(&footer[2..]).unwrap();
    assert!((slopes["sup_ea_slope"].as_f64().unwrap() - 4.0).abs() < 0.5);
}

#[test]
fn scaling_with_one_a_has_no_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&["scaling", "--grid-n", "8", "--a-list", "0.01", "--out", &out_arg(&dir)]);
    assert_ne!(code, 2);
    let text = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let footer = text.lines().find(|l| l.starts_with("# ")).unwrap();
    let slopes: Value = serde_json::from_str(&footer[2..]).unwrap();
    assert!(slopes.get("sup_ea_slope").is_none_or(Value::is_null));
}

#[test]
fn solve_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(&["solve", "--grid-n", "8", "--out", &out_arg(&dir)]);
    assert_ne!(code, 2, "{stderr}");
    for name in ["solve_trace.csv", "solve_phi.kumf", "solve_summary.json", "solve.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let trace = std::fs::read_to_string(dir.path().join("solve_trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("iter,"));
    let r = report(&dir.path().join("solve.json"));
    assert_eq!(code == 0, r.pass);
}

#[test]
fn resolved_solve_fails_only_the_ball_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(&dir);
    let (code, _, stderr) = run(&["solve", "--zeta", "0.24", "--grid-n", "16", "--ball-policy", "report", "--out", &o]);
    assert_eq!(code, 1, "{stderr}");
    let r = report(&dir.path().join("solve.json"));
    assert_eq!(r.failing(), vec!["ball_respected"]);
}

#[test]
fn uniqueness_and_lambda1_run_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(&dir);
    let (code, _, stderr) = run(&["uniqueness", "--grid-n", "8", "--out", &o]);
    assert_eq!(code, 0, "{stderr}");
    assert!(report(&dir.path().join("uniqueness.json")).pass);
    let (code, _, stderr) = run(&["lambda1", "--grid-n", "8", "--out", &o]);
    assert_ne!(code, 2, "{stderr}");
    let r = report(&dir.path().join("lambda1.json"));
    assert!(r.checks.iter().any(|c| c.check == "poincare_inequality" && c.pass));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"a": 0.02, "zeta": 0.2, "grid_n": 12, "seed": 9, "out": "ignored"}"#).unwrap();
    let flags = Flags {
        config: Some(path.clone()),
        grid_n: Some(8),
        out: Some(dir.path().to_path_buf()),
        ..Flags::default()
    };
    let cfg = RunConfig::resolve(Command::Solve, &flags).unwrap();
    assert_eq!(cfg.a, 0.02);
    assert_eq!(cfg.zeta, 0.2);
    assert_eq!(cfg.grid_n, 8);
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.out, dir.path());
    assert_eq!(cfg.alpha, 0.1);

    std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
    assert!(RunConfig::resolve(Command::Solve, &flags).is_err());
}

#[test]
fn per_command_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let flags = Flags {
        out: Some(dir.path().to_path_buf()),
        ..Flags::default()
    };
    let eh = RunConfig::resolve(Command::VerifyEh, &flags).unwrap();
    assert_eq!(eh.a, 1.0);
    let gh = RunConfig::resolve(Command::VerifyGh, &flags).unwrap();
    assert_eq!(gh.c, 0.5);
    let scaling = RunConfig::resolve(Command::Scaling, &flags).unwrap();
    assert_eq!(scaling.zeta, 0.24);
    assert_eq!(scaling.a_list, vec![0.005, 0.01, 0.02]);
    let solve = RunConfig::resolve(Command::Solve, &flags).unwrap();
    assert_eq!((solve.a, solve.zeta, solve.grid_n), (0.01, 1.0 / 9.0, 16));
}
