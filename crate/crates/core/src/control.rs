//! PI current regulation in the rotor frame, set-points and injection schedules.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::machine::{FrameVec, MachineParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiState {
    pub kp: f64,
    pub ki: f64,
    pub integrator: f64,
    /// Output and integrator bound, volts. `f64::INFINITY` disables it.
    pub limit: f64,
}

impl PiState {
    pub fn new(kp: f64, ki: f64, limit: f64) -> Self {
        Self { kp, ki, integrator: 0.0, limit }
    }
}

/// `v = kp e + integrator`, then `integrator += ki e Ts`; both clamped to `±limit`.
pub fn pi_step(pi: &PiState, error: f64, ts: f64) -> (f64, PiState) {
    let v = (pi.kp * error + pi.integrator).clamp(-pi.limit, pi.limit);
    let integrator = (pi.integrator + pi.ki * error * ts).clamp(-pi.limit, pi.limit);
    (v, PiState { integrator, ..*pi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    /// `amplitude · sin(frequency · t)` amperes added to the q-axis reference.
    #[default]
    CurrentOnQ,
    /// `amplitude · cos(frequency · t)` volts on the d-axis of the estimated frame.
    VoltageOnDhat,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSchedule {
    pub kind: InjectionKind,
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl InjectionSchedule {
    pub fn none() -> Self {
        Self { kind: InjectionKind::None, amplitude: 0.0, frequency: 0.0, t_start: 0.0, t_end: 1.0 }
    }

    /// 0.5 A at 500 Hz on the q-axis current over `[0.2, 0.5)` s.
    pub fn reference_current() -> Self {
        Self { kind: InjectionKind::CurrentOnQ, amplitude: 0.5, frequency: 1000.0 * PI, t_start: 0.2, t_end: 0.5 }
    }

    /// The window is closed at its start and open at its end.
    pub fn is_active(&self, t: f64) -> bool {
        self.kind != InjectionKind::None && t >= self.t_start && t < self.t_end
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.t_start < self.t_end) {
            v.push(format!("injection window start {} must precede its end {}", self.t_start, self.t_end));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            v.push(format!("injection amplitude must be finite and non-negative, got {}", self.amplitude));
        }
        if !self.frequency.is_finite() {
            v.push("injection frequency must be finite".into());
        }
        v
    }

    /// The injected d̂-axis voltage at `t`, zero outside the window or for other kinds.
    pub fn dhat_voltage(&self, t: f64) -> f64 {
        if self.kind == InjectionKind::VoltageOnDhat && self.is_active(t) {
            self.amplitude * (self.frequency * t).cos()
        } else {
            0.0
        }
    }
}

/// `(i_d_ref, i_q_ref)`: the base set-points plus the q-axis current injection when active.
pub fn current_reference(t: f64, schedule: &InjectionSchedule, base: (f64, f64)) -> (f64, f64) {
    if schedule.kind == InjectionKind::CurrentOnQ && schedule.is_active(t) {
        (base.0, base.1 + schedule.amplitude * (schedule.frequency * t).sin())
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// Closed current-loop bandwidth, Hz.
    pub bandwidth_hz: f64,
    pub voltage_limit: f64,
    /// Explicit gains override the bandwidth rule.
    pub kp_d: Option<f64>,
    pub ki_d: Option<f64>,
    pub kp_q: Option<f64>,
    pub ki_q: Option<f64>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { bandwidth_hz: 500.0, voltage_limit: 50.0, kp_d: None, ki_d: None, kp_q: None, ki_q: None }
    }
}

impl ControlConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            v.push(format!("current-loop bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        if !(self.voltage_limit > 0.0) {
            v.push(format!("voltage limit must be positive, got {}", self.voltage_limit));
        }
        for (name, g) in [("kp_d", self.kp_d), ("ki_d", self.ki_d), ("kp_q", self.kp_q), ("ki_q", self.ki_q)] {
            if let Some(g) = g {
                if !(g >= 0.0 && g.is_finite()) {
                    v.push(format!("{name} must be finite and non-negative, got {g}"));
                }
            }
        }
        v
    }
}

/// Two PI loops on the rotor-frame currents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentController {
    pub d: PiState,
    pub q: PiState,
}

impl CurrentController {
    /// Pole-zero cancelling gains `kp = L ω_c`, `ki = R ω_c` per axis unless overridden.
    pub fn new(params: &MachineParams, cfg: &ControlConfig) -> Self {
        let wc = 2.0 * PI * cfg.bandwidth_hz;
        let lim = cfg.voltage_limit;
        let d = PiState::new(cfg.kp_d.unwrap_or(params.ld() * wc), cfg.ki_d.unwrap_or(params.resistance * wc), lim);
        let q = PiState::new(cfg.kp_q.unwrap_or(params.lq() * wc), cfg.ki_q.unwrap_or(params.resistance * wc), lim);
        Self { d, q }
    }
}

/// Stationary-frame voltage command.
///
/// The PI outputs are rotated with `theta_park` (the true position in the
/// study). A d̂-axis voltage injection, when scheduled, is added along
/// `[cos θ̂, sin θ̂]`.
#[allow(clippy::too_many_arguments)]
pub fn controller_step(
    ctrl: &CurrentController,
    i_dq_meas: &Vector2<f64>,
    refs: (f64, f64),
    theta_park: f64,
    ts: f64,
    t: f64,
    injection: &InjectionSchedule,
    theta_hat: f64,
) -> (FrameVec, CurrentController) {
    let (vd, d) = pi_step(&ctrl.d, refs.0 - i_dq_meas[0], ts);
    let (vq, q) = pi_step(&ctrl.q, refs.1 - i_dq_meas[1], ts);
    let v = FrameVec::dq(vd, vq).inverse_park(theta_park).expect("dq input");
    let hf = injection.dhat_voltage(t);
    let v = FrameVec::alpha_beta(v.v[0] + hf * theta_hat.cos(), v.v[1] + hf * theta_hat.sin());
    (v, CurrentController { d, q })
}
