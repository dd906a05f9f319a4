//! Browser bindings: run the standstill study, inspect one operating point,
//! and map the injection determinant.
//!
//! Results cross the boundary as flat `Float64Array`s; the column layouts are
//! listed on each function.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use nalgebra::Vector2;
use pmsm_observability::control::{InjectionKind, InjectionSchedule};
use pmsm_observability::machine::{FrameVec, MachineParams, MachineState};
use pmsm_observability::observability::{hfi_det_y1, ObservabilityReport};
use pmsm_observability::simulation::{default_paper_scenario, run_scenario, MachineKind};
use wasm_bindgen::prelude::*;

fn kind(machine: &str) -> Result<MachineKind, JsError> {
    match machine {
        "ipmsm" => Ok(MachineKind::Ipmsm),
        "spmsm" => Ok(MachineKind::Spmsm),
        other => Err(JsError::new(&format!("unknown machine `{other}`, expected ipmsm or spmsm"))),
    }
}

fn js(e: pmsm_observability::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Columns per row of [`simulate`].
pub const TRACE_COLUMNS: usize = 6;

/// Runs the reference scenario with the given initial position error (rad)
/// and q-axis injection amplitude (A), keeping every `every`-th sample.
///
/// Rows: `t, theta_err, omega_err, omega_true, rank, det_y1`. A run that
/// stops early returns the rows computed so far.
#[wasm_bindgen]
pub fn simulate(machine: &str, theta_err0: f64, injection_amplitude: f64, every: usize) -> Result<Vec<f64>, JsError> {
    let mut scn = default_paper_scenario(kind(machine)?);
    scn.theta_hat_error0 = theta_err0;
    scn.injection.amplitude = injection_amplitude;
    let log = run_scenario(&scn).map_err(js)?;
    Ok(log
        .rows
        .iter()
        .step_by(every.max(1))
        .flat_map(|r| [r.t, r.theta_err, r.omega_err, r.omega_true, r.rank as f64, r.det_y1])
        .collect())
}

/// Observability at a steady operating point given in rotor coordinates.
///
/// Returns `det_y1, det_y2, det_y3, rank, psi_o_d, psi_o_q, margin,
/// sigma_1..sigma_4`.
#[wasm_bindgen]
pub fn analyze_point(machine: &str, i_d: f64, i_q: f64, omega: f64, theta: f64) -> Result<Vec<f64>, JsError> {
    let p = default_paper_scenario(kind(machine)?).params;
    let i = FrameVec::dq(i_d, i_q).inverse_park(theta).map_err(js)?.v;
    // voltage that holds the currents constant
    let v_dq = FrameVec::dq(p.resistance * i_d - omega * p.lq() * i_q, p.resistance * i_q + omega * (p.ld() * i_d + p.psi_r));
    let v = v_dq.inverse_park(theta).map_err(js)?.v;
    let s = MachineState { i_alpha: i[0], i_beta: i[1], omega, theta, load_torque: 0.0 };
    let r = ObservabilityReport::evaluate(0.0, &s, &Vector2::new(v[0], v[1]), 0.0, &p).map_err(js)?;
    let mut out = vec![r.det_y1, r.det_y2, r.det_y3, r.numeric_rank as f64, r.psi_o_d, r.psi_o_q, r.margin];
    out.extend(&r.singular_values);
    Ok(out)
}

/// Injection determinant of the surface-magnet machine over a grid of
/// position errors in `[-π, π]` (rows) and times in one carrier period
/// (columns), with a d̂-axis voltage of `v_hf` volts at `freq_hz`.
#[wasm_bindgen]
pub fn hfi_map(v_hf: f64, freq_hz: f64, omega: f64, n_err: usize, n_t: usize) -> Result<Vec<f64>, JsError> {
    let p = MachineParams::reference_spmsm();
    let sched = InjectionSchedule { kind: InjectionKind::VoltageOnDhat, amplitude: v_hf, frequency: 2.0 * PI * freq_hz, t_start: 0.0, t_end: 1.0 };
    if let Some(msg) = sched.violations().first() {
        return Err(JsError::new(msg));
    }
    if !(freq_hz > 0.0) {
        return Err(JsError::new("injection frequency must be positive"));
    }
    let (n_err, n_t) = (n_err.max(2), n_t.max(2));
    let mut out = Vec::with_capacity(n_err * n_t);
    for a in 0..n_err {
        let err = -PI + 2.0 * PI * a as f64 / (n_err - 1) as f64;
        for b in 0..n_t {
            let t = b as f64 / ((n_t - 1) as f64 * freq_hz);
            out.push(hfi_det_y1(omega, err, t, v_hf, sched.frequency, &p).map_err(js)?);
        }
    }
    Ok(out)
}
