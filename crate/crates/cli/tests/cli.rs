use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmsm-obs"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name).display().to_string()
}

#[test]
fn print_config_shows_defaults() {
    let out = bin().args(["simulate", "--print-config", "--machine", "spmsm"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[machine]") && text.contains("q_diag") && text.contains("bandwidth_hz"), "{text}");
}

#[test]
fn analyze_spmsm_standstill_state_reports_rank_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let text = std::fs::read_to_string(fixture("reference_spmsm.toml")).unwrap()
        + "\n[analyze]\nsource = \"state\"\nstate = { i_alpha = -3.0, i_beta = 14.0, omega = 0.0, theta = 1.1 }\nvoltage = [-0.03, 0.14]\n";
    std::fs::write(&cfg, text).unwrap();
    let out = bin().args(["analyze", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("rank = 3"));
}

#[test]
fn validation_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[machine]\nresistance = 0.01\nl0 = 1e-3\nl2 = 1e-3\npsi_r = 0.02\npole_pairs = 2\n").unwrap();
    let out = bin().args(["simulate", "-c", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("l2"));
}

#[test]
fn missing_config_file_exits_with_three() {
    let out = bin().args(["simulate", "-c", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn hfi_voltage_sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    let text = std::fs::read_to_string(fixture("reference_spmsm.toml")).unwrap()
        + "\n[sweep]\nparameter = \"hfi_voltage\"\nvalues = [0.0, 1.0, 2.0]\nomega = 10.0\ntimes = [0.0]\n";
    std::fs::write(&cfg, text).unwrap();
    let out = bin().args(["sweep", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    // V_hf = 0 leaves -(ψr/L0)² ω
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    let expect = -(0.0225f64 / 0.65e-3).powi(2) * 10.0;
    assert!((first[4] - expect).abs() <= 1e-12 * expect.abs());
}

#[test]
fn spmsm_reference_run_ends_converged_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = bin().args(["simulate", "-c", &fixture("reference_spmsm.toml"), "-o", out_dir.to_str().unwrap()]).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap()
    };
    let csv = run("a");
    let header: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "theta_err").unwrap();
    let last: f64 = csv.lines().last().unwrap().split(',').nth(col).unwrap().parse().unwrap();
    assert!(last.abs() < 0.05, "final theta_err {last}");
    assert_eq!(csv, run("b"));
}
