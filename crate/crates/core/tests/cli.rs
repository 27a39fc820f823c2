use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracdiff::config::RunConfig;
use fracdiff::io::{read_observations, RunReport};
use fracdiff::objective::ResidualModel;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracdiff"))
        .args(args)
        .env("FRACDIFF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ml_prints_values_and_flags_bad_input() {
    let ok = run(&["ml", "--beta", "1", "--z", "0,-1"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8(ok.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "z,value");
    assert_eq!(lines[1], "0,1");
    let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - (-1f64).exp()).abs() < 1e-15);

    assert_eq!(code(&run(&["ml", "--beta", "0"])), 1);
    assert_eq!(code(&run(&["ml", "--beta", "1.5", "--z", "-100"])), 2);
    assert_eq!(code(&run(&["nonsense"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn observe_is_deterministic_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&["observe", "--delta", "0.01", "--seed", "3", "--out", s(p)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let echo = fs::read_to_string(dir.path().join("a.csv.config")).unwrap();
    let cfg = RunConfig::parse_str(&echo).unwrap();
    assert_eq!(cfg.delta, 0.01);
    assert_eq!(cfg.seed, 3);
    assert_eq!(read_observations(&a).unwrap().len(), 200);
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(dir.path(), "k.cfg", "alpha2 = 0.5\n");
    let out = run(&["observe", "--config", &bad_key, "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let bad_range = write_config(dir.path(), "r.cfg", "delta = -1\n");
    let out = run(&["observe", "--config", &bad_range, "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(code(&out), 1);

    let missing = dir.path().join("missing.csv");
    let out = run(&["estimate", "--obs", s(&missing), "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn degenerate_signal_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.cfg", "initial_condition = 2:1\ndelta = 0.5\n");
    let out = run(&["observe", "--config", &cfg, "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn forward_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("u.csv");
    let out = run(&["forward", "--a", "0.5,0.7,1.3", "--x", "0.25", "--out", s(&out_path)]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("t,u\n"));
    assert_eq!(text.lines().count(), 201);
    assert!(dir.path().join("u.csv.config").exists());
}

#[test]
fn estimate_report_reproduces_final_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    assert_eq!(code(&run(&["observe", "--out", s(&obs)])), 0);
    let report_path = dir.path().join("report.txt");
    let trace = dir.path().join("trace.csv");
    let out = run(&["estimate", "--obs", s(&obs), "--out", s(&report_path), "--trace", s(&trace)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report = RunReport::read(&report_path).unwrap();
    let observations = read_observations(&obs).unwrap();
    let cfg = &report.config;
    let model = ResidualModel::with_steps(observations, cfg.expansion().unwrap(), cfg.bounds, cfg.lambda, cfg.fd_steps)
        .unwrap();
    let i = model.discrepancy(&report.estimate.a_final).unwrap();
    assert!((i - report.estimate.i_final).abs() <= 1e-12, "{i} vs {}", report.estimate.i_final);
    assert!(report.estimate.termination.converged());

    let trace_text = fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("iter,F,I,grad_norm,R,rho,beta,alpha,gamma\n"));
    assert_eq!(trace_text.lines().count(), report.estimate.history.len() + 1);
}

#[test]
fn estimate_with_starts_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    assert_eq!(code(&run(&["observe", "--out", s(&obs)])), 0);
    let rep = dir.path().join("r.txt");
    let out = run(&["estimate", "--obs", s(&obs), "--starts", "3", "--seed", "5", "--out", s(&rep)]);
    assert_eq!(code(&out), 0);
    let table = fs::read_to_string(dir.path().join("r.txt.starts.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert_eq!(code(&run(&["estimate", "--obs", s(&obs), "--starts", "0", "--out", s(&rep)])), 1);
}

#[test]
fn estimate_step_outside_domain_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    assert_eq!(code(&run(&["observe", "--out", s(&obs)])), 0);
    let cfg = write_config(dir.path(), "h.cfg", "fd_step_gamma = 0.4\n");
    let out = run(&["estimate", "--config", &cfg, "--obs", s(&obs), "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    assert_eq!(code(&run(&["observe", "--delta", "0.01", "--seed", "1", "--out", s(&obs)])), 0);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&["sweep", "--obs", s(&obs), "--grid", "dyadic:-2:-4", "--out", s(p)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("lambda,beta,alpha,gamma,I,converged\n"));
    assert_eq!(text.lines().count(), 4);
    let bad = run(&["sweep", "--obs", s(&obs), "--grid", "dyadic:-4:-2", "--out", s(&a)]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn truncation_and_example2_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let recon = dir.path().join("recon.csv");
    let cfg = write_config(dir.path(), "e2.cfg", "initial_condition = example2\n");
    let out = run(&["truncation", "--config", &cfg, "--levels", "5,10", "--out", s(&t), "--recon", s(&recon)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&t).unwrap();
    assert!(text.starts_with("N,beta,alpha,gamma,I\n"));
    assert_eq!(text.lines().count(), 3);
    assert!(fs::read_to_string(&recon).unwrap().starts_with("t,N5,N10"));

    let e2 = dir.path().join("e2");
    let out = run(&["example2", "--levels", "5,10", "--out-dir", s(&e2)]);
    assert_eq!(code(&out), 0);
    for f in ["truncation.csv", "reconstruction.csv", "observations.csv"] {
        assert!(e2.join(f).exists(), "{f}");
    }
}

#[test]
fn example1_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["example1", "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.txt", "trace.csv", "curves.csv", "observations.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("sweep.csv").exists());
    let report = RunReport::read(&dir.path().join("report.txt")).unwrap();
    assert_eq!(report.estimate.lambda, 1e-7);
}
