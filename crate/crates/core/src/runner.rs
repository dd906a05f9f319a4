//! `simulate`, `analyze` and `sweep` on a validated configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use crate::config::{AnalyzeSource, RunConfig, SweepParameter};
use crate::error::{Error, Result};
use crate::observability::{hfi_det_y1, ObservabilityReport};
use crate::output::{read_trajectory, summarize, write_trajectory_csv, Phase, Summary};
use crate::simulation::{analysis_row, run_scenario, run_scenario_with, Scenario, TrajectoryLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Analyze,
    Sweep,
}

/// Process exit status for a command result.
pub fn exit_code<T>(r: &Result<T>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(Error::Io(_)) => 3,
        Err(Error::NumericalAbort { .. } | Error::NonFinite(_) | Error::SingularInnovation) => 2,
        Err(_) => 1,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::File::create(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    create(path)?.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

fn write_log(path: &Path, log: &TrajectoryLog) -> Result<()> {
    let file = create(path)?;
    write_trajectory_csv(std::io::BufWriter::new(file), &log.rows)
}

/// Runs one command, writes its files and returns the text report.
/// A numerical abort still writes the partial trajectory before failing.
pub fn run_command(cfg: &RunConfig, mode: Mode) -> Result<String> {
    match mode {
        Mode::Simulate => simulate(cfg),
        Mode::Analyze => analyze(cfg),
        Mode::Sweep => sweep(cfg),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.dir().join(name)
}

fn simulate(cfg: &RunConfig) -> Result<String> {
    let log = run_scenario(&cfg.scenario)?;
    let csv = out_path(cfg, &cfg.output.csv_name());
    write_log(&csv, &log)?;
    let mut text = format!("trajectory: {} ({} samples)\n", csv.display(), log.rows.len());
    if !log.rows.is_empty() {
        let summary = summarize(&log.rows)?;
        let last = log.rows.last().expect("non-empty");
        let _ = writeln!(text, "final |theta_err| = {:e} rad", last.theta_err.abs());
        text.push_str(&summary.to_string());
        write_text(&out_path(cfg, &cfg.output.summary_name()), &text)?;
    }
    match log.abort_error() {
        Some(e) => Err(e),
        None => Ok(text),
    }
}

fn format_report(r: &ObservabilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "det_y1 = {}", r.det_y1);
    let _ = writeln!(s, "det_y2 = {}", r.det_y2);
    let _ = writeln!(s, "det_y3 = {}", r.det_y3);
    let sv: Vec<String> = r.singular_values.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(s, "singular values = [{}]", sv.join(", "));
    let _ = writeln!(s, "rank = {}", r.numeric_rank);
    let _ = writeln!(s, "observability vector = ({}, {}), theta_o = {}", r.psi_o_d, r.psi_o_q, r.theta_o);
    let _ = writeln!(s, "margin = {}", r.margin);
    s
}

fn analyze(cfg: &RunConfig) -> Result<String> {
    let a = &cfg.analyze;
    let params = cfg.scenario.params;
    let log = match a.source {
        AnalyzeSource::State => {
            let v = Vector2::new(a.voltage[0], a.voltage[1]);
            let r = ObservabilityReport::evaluate(0.0, &a.state, &v, a.acceleration, &params)?;
            let text = format_report(&r);
            write_text(&out_path(cfg, "analysis.txt"), &text)?;
            return Ok(text);
        }
        AnalyzeSource::Scenario => run_scenario_with(&cfg.scenario, false)?,
        AnalyzeSource::Csv => {
            let input = a.input.as_ref().expect("validated");
            let file = fs::File::open(input).map_err(|e| io_err(input, e))?;
            let points = read_trajectory(file)?;
            let mut rows = Vec::with_capacity(points.len());
            for p in &points {
                rows.push(analysis_row(p.t, &p.state, &p.v_ab, p.acceleration, &params)?);
            }
            TrajectoryLog { rows, abort: None }
        }
    };
    let csv = out_path(cfg, "analysis.csv");
    write_log(&csv, &log)?;
    let n = log.rows.len().max(1) as f64;
    let deficient = log.rows.iter().filter(|r| r.rank < 4).count();
    let text = format!(
        "analysis: {} ({} samples)\nrank-deficient fraction = {}\n",
        csv.display(),
        log.rows.len(),
        deficient as f64 / n
    );
    match log.abort_error() {
        Some(e) => Err(e),
        None => Ok(text),
    }
}

/// One simulated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub final_abs_theta_err: f64,
    pub summary: Summary,
    pub aborted: bool,
}

fn apply(base: &Scenario, p: SweepParameter, value: f64) -> Scenario {
    let mut s = base.clone();
    match p {
        SweepParameter::InjectionAmplitude => s.injection.amplitude = value,
        SweepParameter::ThetaHatError0 => s.theta_hat_error0 = value,
        SweepParameter::NoiseStd => s.noise_std = value,
        SweepParameter::HfiVoltage => unreachable!("analytic sweep"),
    }
    s
}

/// Runs the scenario at each value; results are in grid order regardless of `threads`.
pub fn sweep_scenarios(base: &Scenario, p: SweepParameter, values: &[f64], threads: usize) -> Result<Vec<SweepPoint>> {
    let run = |v: f64| -> Result<SweepPoint> {
        let scn = apply(base, p, v);
        scn.validate()?;
        let log = run_scenario(&scn)?;
        Ok(SweepPoint {
            value: v,
            final_abs_theta_err: log.rows.last().map_or(f64::NAN, |r| r.theta_err.abs()),
            summary: summarize(&log.rows)?,
            aborted: log.abort.is_some(),
        })
    };
    let chunk = values.len().div_ceil(threads.max(1)).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = values.chunks(chunk).map(|c| s.spawn(move || c.iter().map(|&v| run(v)).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

fn stat(s: &Summary, p: Phase, f: impl Fn(&crate::output::PhaseStats) -> f64) -> String {
    s.phase(p).map_or("NaN".to_string(), |st| f(st).to_string())
}

fn sweep(cfg: &RunConfig) -> Result<String> {
    let sw = &cfg.sweep;
    let mut csv = String::new();
    if sw.parameter == SweepParameter::HfiVoltage {
        let params = cfg.scenario.params;
        csv.push_str("v_hf,t,omega,theta_err,hfi_det\n");
        for &v in &sw.values {
            for &t in &sw.times {
                let d = hfi_det_y1(sw.omega, sw.theta_err, t, v, sw.hf_frequency, &params)?;
                let _ = writeln!(csv, "{v},{t},{},{},{d}", sw.omega, sw.theta_err);
            }
        }
    } else {
        let points = sweep_scenarios(&cfg.scenario, sw.parameter, &sw.values, sw.threads)?;
        csv.push_str(
            "value,final_abs_theta_err,standstill_max_abs_theta_err,injection_max_abs_theta_err,\
             motion_max_abs_theta_err,injection_mean_abs_theta_err,motion_mean_abs_omega_err,aborted\n",
        );
        for p in &points {
            let s = &p.summary;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                p.value,
                p.final_abs_theta_err,
                stat(s, Phase::Standstill, |x| x.max_abs_theta_err),
                stat(s, Phase::Injection, |x| x.max_abs_theta_err),
                stat(s, Phase::Motion, |x| x.max_abs_theta_err),
                stat(s, Phase::Injection, |x| x.mean_abs_theta_err),
                stat(s, Phase::Motion, |x| x.mean_abs_omega_err),
                p.aborted
            );
        }
    }
    write_text(&out_path(cfg, "sweep.csv"), &csv)?;
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{default_paper_scenario, MachineKind};

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(())), 0);
        assert_eq!(exit_code::<()>(&Err(Error::InvalidConfig(vec![]))), 1);
        assert_eq!(exit_code::<()>(&Err(Error::NumericalAbort { time: 0.1, reason: "x".into() })), 2);
        assert_eq!(exit_code::<()>(&Err(Error::Io("x".into()))), 3);
    }

    #[test]
    fn standstill_state_analysis_of_spmsm() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::from_scenario(default_paper_scenario(MachineKind::Spmsm));
        cfg.output.dir = Some(dir.path().to_path_buf());
        cfg.analyze.source = AnalyzeSource::State;
        let text = run_command(&cfg, Mode::Analyze).unwrap();
        assert!(text.contains("rank = 3"), "{text}");
    }

    #[test]
    fn parallel_sweep_keeps_grid_order() {
        let mut base = default_paper_scenario(MachineKind::Spmsm);
        base.t_end = 0.01;
        let values = [0.3, -0.2, 0.1];
        let one = sweep_scenarios(&base, SweepParameter::ThetaHatError0, &values, 1).unwrap();
        let three = sweep_scenarios(&base, SweepParameter::ThetaHatError0, &values, 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.iter().map(|p| p.value).collect::<Vec<_>>(), values);
    }
}
