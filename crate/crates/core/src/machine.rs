//! Continuous-time PMSM model in the stator (αβ) and rotor (dq) frames.
//!
//! State ordering everywhere in the crate is `[i_alpha, i_beta, omega, theta]`.
//! The inductance matrix is parameterized by its average `l0` and
//! differential `l2` components, so `Ld = l0 + l2`, `Lq = l0 - l2`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Electrical and mechanical constants of one machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    /// Stator phase resistance (ohm).
    pub resistance: f64,
    /// Average inductance (H).
    pub l0: f64,
    /// Differential inductance (H), signed. Zero for a surface-mounted machine.
    pub l2: f64,
    /// Rotor permanent-magnet flux (V·s/rad).
    pub psi_r: f64,
    pub pole_pairs: u32,
    /// Rotor plus load inertia (kg·m²).
    pub inertia: f64,
}

impl MachineParams {
    /// Inertia used when none is given. The reference machine table has no inertia entry.
    pub const DEFAULT_INERTIA: f64 = 1e-3;

    pub fn new(
        resistance: f64,
        l0: f64,
        l2: f64,
        psi_r: f64,
        pole_pairs: u32,
        inertia: f64,
    ) -> Result<Self> {
        let params = Self { resistance, l0, l2, psi_r, pole_pairs, inertia };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from the rotor-frame inductances.
    pub fn from_dq_inductances(
        resistance: f64,
        ld: f64,
        lq: f64,
        psi_r: f64,
        pole_pairs: u32,
        inertia: f64,
    ) -> Result<Self> {
        Self::new(resistance, 0.5 * (ld + lq), 0.5 * (ld - lq), psi_r, pole_pairs, inertia)
    }

    /// The interior-magnet reference machine: p = 2, R = 0.01 Ω, Ld = 0.5 mH,
    /// Lq = 0.8 mH, ψr = 0.0225 V·s/rad.
    pub fn reference_ipmsm() -> Self {
        let (ld, lq) = (0.5e-3, 0.8e-3);
        Self {
            resistance: 0.01,
            l0: 0.5 * (ld + lq),
            l2: 0.5 * (ld - lq),
            psi_r: 0.0225,
            pole_pairs: 2,
            inertia: Self::DEFAULT_INERTIA,
        }
    }

    /// Same machine with the saliency removed.
    pub fn reference_spmsm() -> Self {
        Self::reference_ipmsm().non_salient()
    }

    pub fn non_salient(mut self) -> Self {
        self.l2 = 0.0;
        self
    }

    pub fn ld(&self) -> f64 {
        self.l0 + self.l2
    }

    pub fn lq(&self) -> f64 {
        self.l0 - self.l2
    }

    /// `Ld - Lq = 2 L2`.
    pub fn l_delta(&self) -> f64 {
        2.0 * self.l2
    }

    pub fn is_salient(&self) -> bool {
        self.l2 != 0.0
    }

    /// Lists every violated invariant rather than stopping at the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [self.resistance, self.l0, self.l2, self.psi_r, self.inertia];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("all machine parameters must be finite".to_string());
        }
        if !(self.resistance > 0.0) {
            out.push(format!("resistance must be > 0 (got {})", self.resistance));
        }
        if !(self.l0 > 0.0) {
            out.push(format!("l0 must be > 0 (got {})", self.l0));
        }
        if !(self.inertia > 0.0) {
            out.push(format!("inertia must be > 0 (got {})", self.inertia));
        }
        if self.pole_pairs < 1 {
            out.push("pole_pairs must be >= 1".to_string());
        }
        if !(self.psi_r >= 0.0) {
            out.push(format!("psi_r must be >= 0 (got {})", self.psi_r));
        }
        if !(self.l2.abs() < self.l0) {
            out.push(format!(
                "|l2| < l0 required for a positive definite inductance matrix (l0 = {}, l2 = {})",
                self.l0, self.l2
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    pub(crate) fn require_non_salient(&self) -> Result<()> {
        if self.is_salient() {
            Err(Error::RequiresNonSalient(self.l2))
        } else {
            Ok(())
        }
    }
}

/// True plant state plus the imposed load torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineState {
    pub i_alpha: f64,
    pub i_beta: f64,
    /// Electrical speed (rad/s).
    pub omega: f64,
    /// Electrical position (rad), unwrapped.
    pub theta: f64,
    /// Load torque (N·m).
    pub load_torque: f64,
}

impl MachineState {
    pub fn currents(&self) -> FrameVec {
        FrameVec::alpha_beta(self.i_alpha, self.i_beta)
    }

    pub fn theta_wrapped(&self) -> f64 {
        wrap_angle(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        [self.i_alpha, self.i_beta, self.omega, self.theta, self.load_torque]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    AlphaBeta,
    Dq,
}

/// A two-component current or voltage vector tagged with its reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameVec {
    pub frame: Frame,
    pub v: Vector2<f64>,
}

impl FrameVec {
    pub fn alpha_beta(alpha: f64, beta: f64) -> Self {
        Self { frame: Frame::AlphaBeta, v: Vector2::new(alpha, beta) }
    }

    pub fn dq(d: f64, q: f64) -> Self {
        Self { frame: Frame::Dq, v: Vector2::new(d, q) }
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<Vector2<f64>> {
        if self.frame == frame {
            Ok(self.v)
        } else {
            Err(Error::FrameMismatch { expected: frame, found: self.frame })
        }
    }

    /// Stator to rotor frame: rotation by `-theta`.
    pub fn park(&self, theta: f64) -> Result<FrameVec> {
        let v = self.expect_frame(Frame::AlphaBeta)?;
        Ok(FrameVec { frame: Frame::Dq, v: rotation(-theta) * v })
    }

    /// Rotor to stator frame: rotation by `theta`.
    pub fn inverse_park(&self, theta: f64) -> Result<FrameVec> {
        let v = self.expect_frame(Frame::Dq)?;
        Ok(FrameVec { frame: Frame::AlphaBeta, v: rotation(theta) * v })
    }

    pub fn try_add(&self, other: &FrameVec) -> Result<FrameVec> {
        let w = other.expect_frame(self.frame)?;
        Ok(FrameVec { frame: self.frame, v: self.v + w })
    }

    pub fn try_sub(&self, other: &FrameVec) -> Result<FrameVec> {
        let w = other.expect_frame(self.frame)?;
        Ok(FrameVec { frame: self.frame, v: self.v - w })
    }

    pub fn scale(&self, k: f64) -> FrameVec {
        FrameVec { frame: self.frame, v: self.v * k }
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }
}

/// `P(theta)`, the counter-clockwise rotation by `theta`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `J2 = P(π/2)`.
pub fn j2() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// `C(θ) = [cos θ, sin θ]`.
pub fn c_vec(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.cos(), theta.sin())
}

/// `C'(θ) = [-sin θ, cos θ]`.
pub fn c_vec_prime(theta: f64) -> Vector2<f64> {
    Vector2::new(-theta.sin(), theta.cos())
}

/// Stator-frame inductance matrix.
pub fn inductance_matrix(theta: f64, params: &MachineParams) -> Matrix2<f64> {
    let (s2, c2) = (2.0 * theta).sin_cos();
    let (l0, l2) = (params.l0, params.l2);
    Matrix2::new(l0 + l2 * c2, l2 * s2, l2 * s2, l0 - l2 * c2)
}

/// First and second derivatives of the inductance matrix with respect to θ.
pub fn inductance_matrix_derivs(theta: f64, params: &MachineParams) -> (Matrix2<f64>, Matrix2<f64>) {
    let (s2, c2) = (2.0 * theta).sin_cos();
    let l2 = params.l2;
    let d1 = Matrix2::new(-2.0 * l2 * s2, 2.0 * l2 * c2, 2.0 * l2 * c2, 2.0 * l2 * s2);
    let d2 = Matrix2::new(-4.0 * l2 * c2, -4.0 * l2 * s2, -4.0 * l2 * s2, 4.0 * l2 * c2);
    (d1, d2)
}

/// Closed-form inverse; the determinant `l0² - l2²` does not depend on θ.
pub fn inductance_matrix_inverse(theta: f64, params: &MachineParams) -> Matrix2<f64> {
    let (s2, c2) = (2.0 * theta).sin_cos();
    let (l0, l2) = (params.l0, params.l2);
    let det = l0 * l0 - l2 * l2;
    Matrix2::new(l0 - l2 * c2, -l2 * s2, -l2 * s2, l0 + l2 * c2) / det
}

/// Time derivative of the full state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    /// Current derivative, in the frame of the call that produced it.
    pub di: FrameVec,
    pub domega: f64,
    pub dtheta: f64,
}

/// Stator-frame current derivative `L⁻¹(v - (R + ωL')i - ψr C'(θ) ω)`.
pub fn current_derivative_ab(
    i: &Vector2<f64>,
    omega: f64,
    theta: f64,
    v: &Vector2<f64>,
    params: &MachineParams,
) -> Vector2<f64> {
    let (l_prime, _) = inductance_matrix_derivs(theta, params);
    let r_eq = Matrix2::identity() * params.resistance + l_prime * omega;
    let rhs = v - r_eq * i - c_vec_prime(theta) * (params.psi_r * omega);
    inductance_matrix_inverse(theta, params) * rhs
}

pub fn torque_alphabeta(state: &MachineState, params: &MachineParams) -> f64 {
    let (ia, ib, th) = (state.i_alpha, state.i_beta, state.theta);
    let (s, c) = th.sin_cos();
    let (s2, c2) = (2.0 * th).sin_cos();
    let pm = params.psi_r * (ib * c - ia * s);
    let rel = params.l2 * ((ia * ia - ib * ib) * s2 - 2.0 * ia * ib * c2);
    1.5 * params.pole_pairs as f64 * (pm - rel)
}

pub fn dynamics_alphabeta(
    state: &MachineState,
    v: &FrameVec,
    params: &MachineParams,
) -> Result<StateDerivative> {
    let v = v.expect_frame(Frame::AlphaBeta)?;
    let i = Vector2::new(state.i_alpha, state.i_beta);
    let di = current_derivative_ab(&i, state.omega, state.theta, &v, params);
    let tm = torque_alphabeta(state, params);
    Ok(StateDerivative {
        di: FrameVec { frame: Frame::AlphaBeta, v: di },
        domega: params.pole_pairs as f64 / params.inertia * (tm - state.load_torque),
        dtheta: state.omega,
    })
}

pub fn torque_dq(i_dq: &FrameVec, params: &MachineParams) -> Result<f64> {
    let i = i_dq.expect_frame(Frame::Dq)?;
    Ok(1.5 * params.pole_pairs as f64 * (params.l_delta() * i[0] + params.psi_r) * i[1])
}

/// Rotor-frame dynamics `di/dt = Ldq⁻¹(v - (R + ω J2 Ldq) i - ψr C'(0) ω)`.
pub fn dynamics_dq(
    i_dq: &FrameVec,
    omega: f64,
    v_dq: &FrameVec,
    load_torque: f64,
    params: &MachineParams,
) -> Result<StateDerivative> {
    let i = i_dq.expect_frame(Frame::Dq)?;
    let v = v_dq.expect_frame(Frame::Dq)?;
    let (ld, lq) = (params.ld(), params.lq());
    let did = (v[0] - params.resistance * i[0] + omega * lq * i[1]) / ld;
    let diq = (v[1] - params.resistance * i[1] - omega * ld * i[0] - omega * params.psi_r) / lq;
    let tm = torque_dq(i_dq, params)?;
    Ok(StateDerivative {
        di: FrameVec::dq(did, diq),
        domega: params.pole_pairs as f64 / params.inertia * (tm - load_torque),
        dtheta: omega,
    })
}

/// Maps a stator-frame current derivative to the derivative of the rotor-frame
/// currents: `d(P⁻¹ i)/dt = P⁻¹ di/dt - ω J2 i_dq`.
pub fn alphabeta_rate_to_dq(
    i_ab: &Vector2<f64>,
    di_ab: &Vector2<f64>,
    omega: f64,
    theta: f64,
) -> Vector2<f64> {
    let p_inv = rotation(-theta);
    p_inv * di_ab - j2() * (p_inv * i_ab) * omega
}

/// Inverse of [`alphabeta_rate_to_dq`].
pub fn dq_rate_to_alphabeta(
    i_dq: &Vector2<f64>,
    di_dq: &Vector2<f64>,
    omega: f64,
    theta: f64,
) -> Vector2<f64> {
    rotation(theta) * (di_dq + j2() * i_dq * omega)
}

/// How the speed state evolves.
///
/// The observability results for the non-salient machine at standstill are
/// stated for `ω ≡ 0`, which is `ImposedSpeed { acceleration: 0.0 }`; the
/// closed-form higher-order determinants assume `Newton`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mechanics {
    /// `dω/dt = (p/J)(T_m - T_l)`.
    Newton { load_torque: f64 },
    /// Speed driven by an external system with a known, locally constant acceleration.
    ImposedSpeed { acceleration: f64 },
}

/// Full state derivative for `x = [i_alpha, i_beta, omega, theta]`, `u = [v_alpha, v_beta]`.
pub fn state_derivative(
    x: &Vector4<f64>,
    u: &Vector2<f64>,
    params: &MachineParams,
    mechanics: Mechanics,
) -> Vector4<f64> {
    let i = Vector2::new(x[0], x[1]);
    let di = current_derivative_ab(&i, x[2], x[3], u, params);
    let domega = match mechanics {
        Mechanics::Newton { load_torque } => {
            let s = MachineState { i_alpha: x[0], i_beta: x[1], omega: x[2], theta: x[3], load_torque };
            params.pole_pairs as f64 / params.inertia * (torque_alphabeta(&s, params) - load_torque)
        }
        Mechanics::ImposedSpeed { acceleration } => acceleration,
    };
    Vector4::new(di[0], di[1], domega, x[2])
}

/// Gradient of the stator-frame torque with respect to `[i_alpha, i_beta, omega, theta]`.
pub fn torque_gradient(x: &Vector4<f64>, params: &MachineParams) -> Vector4<f64> {
    let (ia, ib, th) = (x[0], x[1], x[3]);
    let (s, c) = th.sin_cos();
    let (s2, c2) = (2.0 * th).sin_cos();
    let (psi, l2) = (params.psi_r, params.l2);
    let k = 1.5 * params.pole_pairs as f64;
    Vector4::new(
        k * (-psi * s - l2 * (2.0 * ia * s2 - 2.0 * ib * c2)),
        k * (psi * c - l2 * (-2.0 * ib * s2 - 2.0 * ia * c2)),
        0.0,
        k * (-psi * (ib * s + ia * c) - l2 * (2.0 * (ia * ia - ib * ib) * c2 + 4.0 * ia * ib * s2)),
    )
}
