//! Scenario engine: imposed mechanical trajectory, current control, EKF and
//! observability evaluation on a fixed sample clock.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{controller_step, current_reference, ControlConfig, CurrentController, InjectionKind, InjectionSchedule};
use crate::error::{Error, Result};
use crate::estimator::{ekf_step, EkfModel, EkfState};
use crate::machine::{current_derivative_ab, wrap_angle, FrameVec, MachineParams, MachineState, Mechanics};
use crate::observability::{hfi_det_y1, ObservabilityReport};

/// Piecewise-linear speed with exactly integrated position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedProfile {
    /// `(time, omega)` pairs, strictly increasing in time. The speed is held
    /// constant before the first and after the last breakpoint.
    pub breakpoints: Vec<(f64, f64)>,
    /// Position at the first breakpoint.
    #[serde(default)]
    pub theta0: f64,
}

impl SpeedProfile {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.breakpoints.is_empty() {
            v.push("speed profile needs at least one breakpoint".into());
        }
        if self.breakpoints.iter().any(|(t, w)| !t.is_finite() || !w.is_finite()) || !self.theta0.is_finite() {
            v.push("speed profile values must be finite".into());
        }
        if self.breakpoints.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            v.push("speed profile times must be strictly increasing".into());
        }
        v
    }

    fn first(&self) -> (f64, f64) {
        self.breakpoints[0]
    }

    pub fn omega(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        let (t0, w0) = self.first();
        if t <= t0 {
            return w0;
        }
        for seg in bp.windows(2) {
            let ((ta, wa), (tb, wb)) = (seg[0], seg[1]);
            if t < tb {
                return wa + (wb - wa) * (t - ta) / (tb - ta);
            }
        }
        bp[bp.len() - 1].1
    }

    /// Slope of the segment that starts at or before `t` (right derivative).
    pub fn acceleration(&self, t: f64) -> f64 {
        for seg in self.breakpoints.windows(2) {
            let ((ta, wa), (tb, wb)) = (seg[0], seg[1]);
            if t >= ta && t < tb {
                return (wb - wa) / (tb - ta);
            }
        }
        0.0
    }

    /// `θ0 + ∫ ω`, exact for the piecewise-linear speed.
    pub fn theta(&self, t: f64) -> f64 {
        let (t0, w0) = self.first();
        if t <= t0 {
            return self.theta0 + w0 * (t - t0);
        }
        let mut theta = self.theta0;
        for seg in self.breakpoints.windows(2) {
            let ((ta, wa), (tb, wb)) = (seg[0], seg[1]);
            if t < tb {
                let dt = t - ta;
                return theta + wa * dt + 0.5 * (wb - wa) / (tb - ta) * dt * dt;
            }
            theta += 0.5 * (wa + wb) * (tb - ta);
        }
        let (tl, wl) = self.breakpoints[self.breakpoints.len() - 1];
        theta + wl * (t - tl)
    }

    /// Standstill to 0.6 s, linear ramp to 50 rad/s at 0.8 s, then constant.
    pub fn reference() -> Self {
        Self { breakpoints: vec![(0.0, 0.0), (0.6, 0.0), (0.8, 50.0), (1.0, 50.0)], theta0: 0.0 }
    }
}

/// Advances the currents by `dt` with classical RK4; speed and position are
/// read from the profile at each stage.
pub fn integrate_electrical(
    state: &MachineState,
    v_ab: &Vector2<f64>,
    profile: &SpeedProfile,
    t: f64,
    dt: f64,
    params: &MachineParams,
) -> Result<MachineState> {
    let f = |tau: f64, i: &Vector2<f64>| current_derivative_ab(i, profile.omega(tau), profile.theta(tau), v_ab, params);
    let i0 = Vector2::new(state.i_alpha, state.i_beta);
    let k1 = f(t, &i0);
    let k2 = f(t + 0.5 * dt, &(i0 + k1 * (0.5 * dt)));
    let k3 = f(t + 0.5 * dt, &(i0 + k2 * (0.5 * dt)));
    let k4 = f(t + dt, &(i0 + k3 * dt));
    let i = i0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = MachineState {
        i_alpha: i[0],
        i_beta: i[1],
        omega: profile.omega(t + dt),
        theta: profile.theta(t + dt),
        load_torque: state.load_torque,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("plant state"))
    }
}

/// Mechanical model inside the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum SpeedModel {
    /// `dω/dt = 0`, driven only by the process noise.
    #[default]
    RandomWalk,
    /// Newton's law with a constant assumed load torque.
    Newton { load_torque: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub q_diag: [f64; 4],
    pub r_diag: [f64; 2],
    pub p0_diag: [f64; 4],
    pub speed_model: SpeedModel,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { q_diag: [1.0, 1.0, 1e3, 0.1], r_diag: [1.0, 1.0], p0_diag: [1.0; 4], speed_model: SpeedModel::RandomWalk }
    }
}

impl EstimatorConfig {
    pub fn mechanics(&self) -> Mechanics {
        match self.speed_model {
            SpeedModel::RandomWalk => Mechanics::ImposedSpeed { acceleration: 0.0 },
            SpeedModel::Newton { load_torque } => Mechanics::Newton { load_torque },
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.q_diag.iter().chain(&self.p0_diag).any(|x| !(*x >= 0.0 && x.is_finite())) {
            v.push("Q and P0 diagonals must be finite and non-negative".into());
        }
        if self.r_diag.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            v.push("R diagonal must be finite and positive".into());
        }
        v
    }
}

/// Which trajectory the observability indicators are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservabilityTarget {
    #[default]
    TrueState,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineKind {
    Ipmsm,
    Spmsm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: MachineParams,
    pub profile: SpeedProfile,
    /// `(i_d*, i_q*)`, amperes.
    pub setpoints: (f64, f64),
    pub injection: InjectionSchedule,
    pub t_end: f64,
    pub ts: f64,
    pub ode_substeps: u32,
    pub theta_hat_error0: f64,
    pub seed: u64,
    /// Standard deviation of the white current-measurement noise; 0 disables it.
    pub noise_std: f64,
    pub estimator: EstimatorConfig,
    pub control: ControlConfig,
    pub observability_on: ObservabilityTarget,
    /// Start with the currents at their set-points and the PI integrators
    /// holding the matching steady-state voltage, instead of from rest.
    pub start_at_setpoint: bool,
}

impl Scenario {
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.params.violations();
        v.extend(self.profile.violations());
        v.extend(self.injection.violations());
        v.extend(self.control.violations());
        v.extend(self.estimator.violations());
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            v.push(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            v.push(format!("sampling period must be positive, got {}", self.ts));
        }
        if self.ode_substeps < 1 {
            v.push("ode_substeps must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            v.push(format!("noise standard deviation must be finite and non-negative, got {}", self.noise_std));
        }
        if !self.theta_hat_error0.is_finite() || !self.setpoints.0.is_finite() || !self.setpoints.1.is_finite() {
            v.push("initial estimate error and set-points must be finite".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(v))
        }
    }

    /// Number of control samples, one log row each.
    pub fn n_samples(&self) -> usize {
        (self.t_end / self.ts).round().max(1.0) as usize
    }

    /// True plant state at `t = 0`.
    pub fn initial_state(&self) -> MachineState {
        let (omega, theta) = (self.profile.omega(0.0), self.profile.theta(0.0));
        let i = if self.start_at_setpoint {
            FrameVec::dq(self.setpoints.0, self.setpoints.1).inverse_park(theta).expect("dq input").v
        } else {
            Vector2::zeros()
        };
        MachineState { i_alpha: i[0], i_beta: i[1], omega, theta, load_torque: 0.0 }
    }

    /// Controller at `t = 0`; when starting at the set-points the integrators
    /// hold `v_d = R i_d - ω Lq i_q`, `v_q = R i_q + ω (Ld i_d + ψr)`.
    pub fn initial_controller(&self) -> CurrentController {
        let mut c = CurrentController::new(&self.params, &self.control);
        if self.start_at_setpoint {
            let p = &self.params;
            let (id, iq) = self.setpoints;
            let w = self.profile.omega(0.0);
            let lim = self.control.voltage_limit;
            c.d.integrator = (p.resistance * id - w * p.lq() * iq).clamp(-lim, lim);
            c.q.integrator = (p.resistance * iq + w * (p.ld() * id + p.psi_r)).clamp(-lim, lim);
        }
        c
    }

    /// Filter at `t = 0`: measured currents, true speed, offset position.
    pub fn initial_filter(&self) -> Result<EkfState> {
        let e = &self.estimator;
        let s = self.initial_state();
        let x0 = Vector4::new(s.i_alpha, s.i_beta, s.omega, s.theta + self.theta_hat_error0);
        EkfState::new(
            x0,
            Matrix4::from_diagonal(&Vector4::from(e.p0_diag)),
            Matrix4::from_diagonal(&Vector4::from(e.q_diag)),
            Matrix2::from_diagonal(&Vector2::from(e.r_diag)),
            self.ts,
        )
    }
}

/// The reference scenario: standstill through the injection window, ramp, hold.
pub fn default_paper_scenario(kind: MachineKind) -> Scenario {
    let params = match kind {
        MachineKind::Ipmsm => MachineParams::reference_ipmsm(),
        MachineKind::Spmsm => MachineParams::reference_spmsm(),
    };
    Scenario {
        params,
        profile: SpeedProfile::reference(),
        setpoints: (0.0, 15.0),
        injection: InjectionSchedule::reference_current(),
        t_end: 1.0,
        ts: 1e-4,
        ode_substeps: 10,
        theta_hat_error0: -FRAC_PI_4,
        seed: 0,
        noise_std: 0.0,
        estimator: EstimatorConfig::default(),
        control: ControlConfig::default(),
        observability_on: ObservabilityTarget::TrueState,
        start_at_setpoint: true,
    }
}

/// One control sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub i_alpha: f64,
    pub i_beta: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub v_alpha: f64,
    pub v_beta: f64,
    pub omega_true: f64,
    /// Wrapped to (-π, π].
    pub theta_true: f64,
    pub omega_hat: f64,
    /// Wrapped to (-π, π].
    pub theta_hat: f64,
    /// `wrap(θ̂ - θ)`.
    pub theta_err: f64,
    pub det_y1: f64,
    pub det_y2: f64,
    pub det_y3: f64,
    pub rank: usize,
    pub psi_o_d: f64,
    pub psi_o_q: f64,
    pub theta_o: f64,
    pub margin: f64,
    // not part of the CSV schema
    pub i_d_ref: f64,
    pub i_q_ref: f64,
    pub omega_err: f64,
    pub acceleration: f64,
    pub injection_active: bool,
    /// d̂-axis voltage-injection determinant (non-salient machine only), else NaN.
    pub hfi_det: f64,
    pub p_asymmetry: f64,
    pub p_min_diag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    /// Set when the run stopped early; `rows` then holds everything up to that point.
    pub abort: Option<Abort>,
}

impl TrajectoryLog {
    pub fn abort_error(&self) -> Option<Error> {
        self.abort.as_ref().map(|a| Error::NumericalAbort { time: a.time, reason: a.reason.clone() })
    }
}

/// A log row with the plant and observability columns filled and every
/// estimator column `NaN`.
pub fn analysis_row(
    t: f64,
    state: &MachineState,
    v: &Vector2<f64>,
    acceleration: f64,
    params: &MachineParams,
) -> Result<LogRow> {
    let report = ObservabilityReport::evaluate(t, state, v, acceleration, params)?;
    let i_dq = state.currents().park(state.theta)?.v;
    Ok(LogRow {
        t,
        i_alpha: state.i_alpha,
        i_beta: state.i_beta,
        i_d: i_dq[0],
        i_q: i_dq[1],
        v_alpha: v[0],
        v_beta: v[1],
        omega_true: state.omega,
        theta_true: state.theta_wrapped(),
        omega_hat: f64::NAN,
        theta_hat: f64::NAN,
        theta_err: f64::NAN,
        det_y1: report.det_y1,
        det_y2: report.det_y2,
        det_y3: report.det_y3,
        rank: report.numeric_rank,
        psi_o_d: report.psi_o_d,
        psi_o_q: report.psi_o_q,
        theta_o: report.theta_o,
        margin: report.margin,
        i_d_ref: f64::NAN,
        i_q_ref: f64::NAN,
        omega_err: f64::NAN,
        acceleration,
        injection_active: false,
        hfi_det: f64::NAN,
        p_asymmetry: f64::NAN,
        p_min_diag: f64::NAN,
    })
}

/// Runs the scenario. Per sample: measure, update the filter with the
/// previous input, compute the references, regulate with the true position,
/// evaluate observability, log, then integrate the plant to the next sample.
pub fn run_scenario(scn: &Scenario) -> Result<TrajectoryLog> {
    run_scenario_with(scn, true)
}

/// As [`run_scenario`]; without the estimator the filter columns are `NaN`
/// and a d̂-axis injection uses the true position.
pub fn run_scenario_with(scn: &Scenario, with_estimator: bool) -> Result<TrajectoryLog> {
    scn.validate()?;
    let params = scn.params;
    let model = EkfModel { params, mechanics: scn.estimator.mechanics() };
    let mut ekf = if with_estimator { Some(scn.initial_filter()?) } else { None };
    let mut ctrl = scn.initial_controller();
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let noise = Normal::new(0.0, scn.noise_std).map_err(|e| Error::InvalidScenario(vec![e.to_string()]))?;

    let mut state = scn.initial_state();
    let mut u_prev = Vector2::zeros();
    let n = scn.n_samples();
    let mut rows = Vec::with_capacity(n);
    let sub_dt = scn.ts / scn.ode_substeps as f64;

    for k in 0..n {
        let t = k as f64 * scn.ts;
        let mut step = || -> Result<(LogRow, Vector2<f64>, CurrentController, Option<EkfState>)> {
            let mut y = Vector2::new(state.i_alpha, state.i_beta);
            if scn.noise_std > 0.0 {
                y += Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng));
            }
            let ekf = match &ekf {
                Some(e) if k > 0 => Some(ekf_step(e, &model, &u_prev, &y)?),
                other => other.clone(),
            };
            let theta_hat = ekf.as_ref().map_or(state.theta, |e| e.x_hat[3]);
            let refs = current_reference(t, &scn.injection, scn.setpoints);
            let (c, s) = (state.theta.cos(), state.theta.sin());
            let i_dq_meas = Vector2::new(c * y[0] + s * y[1], -s * y[0] + c * y[1]);
            let (v, ctrl) = controller_step(&ctrl, &i_dq_meas, refs, state.theta, scn.ts, t, &scn.injection, theta_hat);
            let v = v.v;

            let acceleration = scn.profile.acceleration(t);
            let mut row = analysis_row(t, &state, &v, acceleration, &params)?;
            if let (ObservabilityTarget::Estimate, Some(e)) = (scn.observability_on, &ekf) {
                let x = &e.x_hat;
                let est = MachineState { i_alpha: x[0], i_beta: x[1], omega: x[2], theta: x[3], load_torque: 0.0 };
                let r = analysis_row(t, &est, &v, 0.0, &params)?;
                (row.det_y1, row.det_y2, row.det_y3, row.rank) = (r.det_y1, r.det_y2, r.det_y3, r.rank);
                (row.psi_o_d, row.psi_o_q, row.theta_o, row.margin) = (r.psi_o_d, r.psi_o_q, r.theta_o, r.margin);
            }
            row.i_d_ref = refs.0;
            row.i_q_ref = refs.1;
            row.injection_active = scn.injection.is_active(t);
            if let Some(e) = &ekf {
                row.omega_hat = e.x_hat[2];
                row.theta_hat = wrap_angle(e.x_hat[3]);
                row.theta_err = wrap_angle(e.x_hat[3] - state.theta);
                row.omega_err = e.x_hat[2] - state.omega;
                row.p_asymmetry = (e.p - e.p.transpose()).abs().max();
                row.p_min_diag = e.p.diagonal().min();
            }
            if !params.is_salient() && scn.injection.kind == InjectionKind::VoltageOnDhat {
                let v_hf = if row.injection_active { scn.injection.amplitude } else { 0.0 };
                let err = if ekf.is_some() { row.theta_err } else { 0.0 };
                row.hfi_det = hfi_det_y1(state.omega, err, t, v_hf, scn.injection.frequency, &params)?;
            }
            Ok((row, v, ctrl, ekf))
        };
        let (row, v, next_ctrl, next_ekf) = match step() {
            Ok(r) => r,
            Err(e) => return Ok(TrajectoryLog { rows, abort: Some(Abort { time: t, reason: e.to_string() }) }),
        };
        rows.push(row);
        ctrl = next_ctrl;
        ekf = next_ekf;
        u_prev = v;

        for j in 0..scn.ode_substeps {
            let tau = t + j as f64 * sub_dt;
            state = match integrate_electrical(&state, &v, &scn.profile, tau, sub_dt, &params) {
                Ok(s) => s,
                Err(e) => return Ok(TrajectoryLog { rows, abort: Some(Abort { time: tau, reason: e.to_string() }) }),
            };
        }
    }
    Ok(TrajectoryLog { rows, abort: None })
}
