//! Trajectory CSV and per-phase summaries.

use std::fmt;
use std::io::{Read, Write};

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::machine::MachineState;
use crate::simulation::LogRow;

/// First line of every trajectory file, a `#` comment.
pub const CSV_SCHEMA: &str = "# schema=pmsm-trajectory/1";

pub const CSV_COLUMNS: [&str; 20] = [
    "t", "i_alpha", "i_beta", "i_d", "i_q", "v_alpha", "v_beta", "omega_true", "theta_true", "omega_hat",
    "theta_hat", "theta_err", "det_y1", "det_y2", "det_y3", "rank", "psi_o_d", "psi_o_q", "theta_o", "margin",
];

fn io_err(e: impl fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Numbers use Rust's shortest round-trip formatting.
pub fn row_fields(r: &LogRow) -> [String; 20] {
    let f = |v: f64| v.to_string();
    [
        f(r.t), f(r.i_alpha), f(r.i_beta), f(r.i_d), f(r.i_q), f(r.v_alpha), f(r.v_beta), f(r.omega_true),
        f(r.theta_true), f(r.omega_hat), f(r.theta_hat), f(r.theta_err), f(r.det_y1), f(r.det_y2), f(r.det_y3),
        r.rank.to_string(), f(r.psi_o_d), f(r.psi_o_q), f(r.theta_o), f(r.margin),
    ]
}

pub fn write_trajectory_csv<W: Write>(mut out: W, rows: &[LogRow]) -> Result<()> {
    writeln!(out, "{CSV_SCHEMA}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(io_err)?;
    for r in rows {
        w.write_record(row_fields(r)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn trajectory_csv_string(rows: &[LogRow]) -> String {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// One sample of a supplied trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: MachineState,
    pub v_ab: Vector2<f64>,
    pub acceleration: f64,
}

/// Reads a trajectory with columns `t, i_alpha, i_beta, omega, theta,
/// v_alpha, v_beta` and an optional `acceleration` (zero when absent). A
/// trajectory file written by this crate also qualifies, through its
/// `omega_true`/`theta_true` columns. `#` lines are comments.
pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectoryPoint>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = rd.headers().map_err(io_err)?.clone();
    let find = |names: &[&str]| names.iter().find_map(|n| headers.iter().position(|h| h == *n));
    let mut missing = Vec::new();
    let mut col = |names: &[&str]| {
        let c = find(names);
        if c.is_none() {
            missing.push(format!("trajectory input lacks a `{}` column", names[0]));
        }
        c.unwrap_or(0)
    };
    let idx = [
        col(&["t"]),
        col(&["i_alpha"]),
        col(&["i_beta"]),
        col(&["omega", "omega_true"]),
        col(&["theta", "theta_true"]),
        col(&["v_alpha"]),
        col(&["v_beta"]),
    ];
    if !missing.is_empty() {
        return Err(Error::InvalidConfig(missing));
    }
    let acc = find(&["acceleration"]);
    let mut points = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidConfig(vec![format!("trajectory record {}: bad number in column {}", n + 1, c + 1)]))
        };
        let v: Vec<f64> = idx.iter().map(|&c| num(c)).collect::<Result<_>>()?;
        points.push(TrajectoryPoint {
            t: v[0],
            state: MachineState { i_alpha: v[1], i_beta: v[2], omega: v[3], theta: v[4], load_torque: 0.0 },
            v_ab: Vector2::new(v[5], v[6]),
            acceleration: acc.map(num).transpose()?.unwrap_or(0.0),
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Zero speed and acceleration, no injection.
    Standstill,
    /// Injection window active.
    Injection,
    /// Rotor moving or accelerating.
    Motion,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Standstill, Phase::Injection, Phase::Motion];

    pub fn of(r: &LogRow) -> Self {
        if r.injection_active {
            Phase::Injection
        } else if r.omega_true != 0.0 || r.acceleration != 0.0 {
            Phase::Motion
        } else {
            Phase::Standstill
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Standstill => "standstill",
            Phase::Injection => "injection",
            Phase::Motion => "motion",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStats {
    pub phase: Phase,
    pub samples: usize,
    pub max_abs_theta_err: f64,
    pub mean_abs_theta_err: f64,
    pub mean_abs_omega_err: f64,
    /// Fraction of samples whose order-3 stack has rank below 4.
    pub rank_deficient_fraction: f64,
    /// Over the samples where the margin is defined; `NaN` if none.
    pub min_abs_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub phases: Vec<PhaseStats>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn phase(&self, p: Phase) -> Option<&PhaseStats> {
        self.phases.iter().find(|s| s.phase == p)
    }
}

/// Running mean; exact for a constant sequence.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut m = 0.0;
    for (k, x) in values.enumerate() {
        m += (x - m) / (k + 1) as f64;
    }
    m
}

pub fn summarize(rows: &[LogRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::InvalidScenario(vec!["cannot summarize an empty trajectory".into()]));
    }
    let mut phases = Vec::new();
    let mut notes = Vec::new();
    for phase in Phase::ALL {
        let sel: Vec<&LogRow> = rows.iter().filter(|r| Phase::of(r) == phase).collect();
        if sel.is_empty() {
            notes.push(format!("no {} samples; phase omitted", phase.name()));
            continue;
        }
        let n = sel.len() as f64;
        let abs_err = sel.iter().map(|r| r.theta_err.abs());
        let margins: Vec<f64> = sel.iter().map(|r| r.margin.abs()).filter(|m| !m.is_nan()).collect();
        phases.push(PhaseStats {
            phase,
            samples: sel.len(),
            max_abs_theta_err: abs_err.clone().fold(f64::NEG_INFINITY, f64::max),
            mean_abs_theta_err: mean(abs_err),
            mean_abs_omega_err: mean(sel.iter().map(|r| r.omega_err.abs())),
            rank_deficient_fraction: sel.iter().filter(|r| r.rank < 4).count() as f64 / n,
            min_abs_margin: margins.iter().copied().reduce(f64::min).unwrap_or(f64::NAN),
        });
    }
    Ok(Summary { phases, notes })
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<11} {:>8} {:>12} {:>12} {:>12} {:>10} {:>12}",
            "phase", "samples", "max|th_err|", "mean|th_err|", "mean|w_err|", "rank<4", "min|margin|"
        )?;
        for p in &self.phases {
            writeln!(
                f,
                "{:<11} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.4} {:>12.4e}",
                p.phase.name(),
                p.samples,
                p.max_abs_theta_err,
                p.mean_abs_theta_err,
                p.mean_abs_omega_err,
                p.rank_deficient_fraction,
                p.min_abs_margin
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, err: f64, omega: f64, inj: bool) -> LogRow {
        let s = MachineState { i_alpha: 1.0, i_beta: 2.0, omega, theta: 0.1, load_torque: 0.0 };
        let mut r = crate::simulation::analysis_row(t, &s, &Vector2::new(0.01, 0.02), 0.0, &crate::machine::MachineParams::reference_ipmsm()).unwrap();
        r.theta_err = err;
        r.omega_err = 0.5;
        r.injection_active = inj;
        r
    }

    #[test]
    fn constant_error_has_equal_max_and_mean() {
        let rows: Vec<_> = (0..10).map(|k| row(k as f64 * 1e-4, -0.3, 0.0, false)).collect();
        let s = summarize(&rows).unwrap();
        let st = s.phase(Phase::Standstill).unwrap();
        assert_eq!(st.max_abs_theta_err, st.mean_abs_theta_err);
        assert_eq!(s.phases.len(), 1);
        assert_eq!(s.notes.len(), 2);
        assert!(s.to_string().contains("note: no injection samples"));
    }

    #[test]
    fn empty_log_is_rejected() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn csv_roundtrip_through_reader() {
        let rows = vec![row(0.0, 0.1, 3.0, false), row(1e-4, 0.2, 3.5, true)];
        let text = trajectory_csv_string(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_SCHEMA));
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let pts = read_trajectory(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].t, 1e-4);
        assert_eq!(pts[1].state.omega, 3.5);
        assert_eq!(pts[0].v_ab, Vector2::new(0.01, 0.02));
    }

    #[test]
    fn reader_reports_missing_columns() {
        let err = read_trajectory("t,i_alpha\n0,1\n".as_bytes()).unwrap_err();
        match err {
            Error::InvalidConfig(v) => assert_eq!(v.len(), 5),
            e => panic!("{e:?}"),
        }
    }
}
