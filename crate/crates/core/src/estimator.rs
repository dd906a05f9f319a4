//! Discrete-time extended Kalman filter on the electromechanical model.
//!
//! The covariance is propagated with the Euler form of the continuous
//! Lyapunov equation, `P + Ts (A P + P Aᵀ) + Q`, and corrected with the
//! plain (non-Joseph) update `P - K C P`. Both are followed by forced
//! symmetrization.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::machine::{state_derivative, torque_gradient, MachineParams, Mechanics};
use crate::observability::current_rate_jacobian;

/// The model the filter runs on. `Mechanics::ImposedSpeed { acceleration: 0.0 }`
/// is a random-walk speed model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfModel {
    pub params: MachineParams,
    pub mechanics: Mechanics,
}

impl EkfModel {
    pub fn f(&self, x: &Vector4<f64>, u: &Vector2<f64>) -> Vector4<f64> {
        state_derivative(x, u, &self.params, self.mechanics)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    /// `[i_alpha, i_beta, omega, theta]`; `theta` is not wrapped.
    pub x_hat: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub r_meas: Matrix2<f64>,
    pub ts: f64,
}

/// Output map `h(x) = [i_alpha, i_beta]`.
pub fn output_matrix() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

fn is_psd(m: &Matrix4<f64>) -> bool {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    m.symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-12 * scale)
}

impl EkfState {
    pub fn new(
        x_hat: Vector4<f64>,
        p: Matrix4<f64>,
        q: Matrix4<f64>,
        r_meas: Matrix2<f64>,
        ts: f64,
    ) -> Result<Self> {
        let s = Self { x_hat, p, q, r_meas, ts };
        let v = s.violations();
        if v.is_empty() {
            Ok(s)
        } else {
            Err(Error::InvalidScenario(v))
        }
    }

    /// Every broken invariant, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            v.push(format!("estimator sampling period must be positive, got {}", self.ts));
        }
        if !self.x_hat.iter().all(|x| x.is_finite()) {
            v.push("initial estimate must be finite".into());
        }
        for (name, m) in [("P0", &self.p), ("Q", &self.q)] {
            if !m.iter().all(|x| x.is_finite()) {
                v.push(format!("{name} must be finite"));
            } else if (m - m.transpose()).abs().max() > 0.0 {
                v.push(format!("{name} must be symmetric"));
            } else if !is_psd(m) {
                v.push(format!("{name} must be positive semidefinite"));
            }
        }
        let r = &self.r_meas;
        if !r.iter().all(|x| x.is_finite()) || (r - r.transpose()).abs().max() > 0.0 || r.cholesky().is_none() {
            v.push("R must be symmetric positive definite".into());
        }
        v
    }
}

/// Jacobians `A = ∂f/∂x` and `C = ∂h/∂x` at `(x_hat, u)`.
pub fn linearize(model: &EkfModel, x_hat: &Vector4<f64>, u: &Vector2<f64>) -> (Matrix4<f64>, Matrix2x4<f64>) {
    let mut a = Matrix4::zeros();
    a.fixed_view_mut::<2, 4>(0, 0).copy_from(&current_rate_jacobian(x_hat, u, &model.params));
    if let Mechanics::Newton { .. } = model.mechanics {
        let k = model.params.pole_pairs as f64 / model.params.inertia;
        a.set_row(2, &(torque_gradient(x_hat, &model.params) * k).transpose());
    }
    a[(3, 2)] = 1.0;
    (a, output_matrix())
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

fn check_finite(ekf: &EkfState, what: &'static str) -> Result<()> {
    if ekf.x_hat.iter().chain(ekf.p.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Euler state prediction and Lyapunov-form covariance propagation.
pub fn predict(ekf: &EkfState, model: &EkfModel, u: &Vector2<f64>) -> Result<EkfState> {
    let (a, _) = linearize(model, &ekf.x_hat, u);
    let x_hat = ekf.x_hat + model.f(&ekf.x_hat, u) * ekf.ts;
    let p = ekf.p + (a * ekf.p + ekf.p * a.transpose()) * ekf.ts + ekf.q;
    let next = EkfState { x_hat, p: symmetrize(&p), ..ekf.clone() };
    check_finite(&next, "EKF prediction")?;
    Ok(next)
}

/// Kalman gain for the current covariance.
pub fn gain(ekf: &EkfState) -> Result<Matrix4x2<f64>> {
    let c = output_matrix();
    let s = c * ekf.p * c.transpose() + ekf.r_meas;
    let s_inv = s.try_inverse().ok_or(Error::SingularInnovation)?;
    Ok(ekf.p * c.transpose() * s_inv)
}

/// Measurement update with the current measurement `y`.
pub fn gain_and_innovate(ekf: &EkfState, y: &Vector2<f64>) -> Result<EkfState> {
    let c = output_matrix();
    let k = gain(ekf)?;
    let x_hat = ekf.x_hat + k * (y - c * ekf.x_hat);
    let p = ekf.p - k * c * ekf.p;
    let next = EkfState { x_hat, p: symmetrize(&p), ..ekf.clone() };
    check_finite(&next, "EKF update")?;
    Ok(next)
}

/// One filter cycle: predict with the input applied over the last period,
/// then correct with the measurement taken at its end.
pub fn ekf_step(ekf: &EkfState, model: &EkfModel, u: &Vector2<f64>, y: &Vector2<f64>) -> Result<EkfState> {
    gain_and_innovate(&predict(ekf, model, u)?, y)
}
