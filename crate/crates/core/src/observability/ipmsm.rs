//! First-order observability of the salient machine and the observability vector.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::machine::{
    c_vec, c_vec_prime, current_derivative_ab, inductance_matrix, inductance_matrix_derivs,
    inductance_matrix_inverse, Frame, FrameVec, MachineParams,
};

/// Analytic Jacobian of the stator-frame current derivative with respect to
/// `[i_alpha, i_beta, omega, theta]`.
pub fn current_rate_jacobian(x: &Vector4<f64>, u: &Vector2<f64>, params: &MachineParams) -> Matrix2x4<f64> {
    let i = Vector2::new(x[0], x[1]);
    let (omega, theta) = (x[2], x[3]);
    let l = inductance_matrix(theta, params);
    let l_inv = inductance_matrix_inverse(theta, params);
    let (l1, l2) = inductance_matrix_derivs(theta, params);
    let r_eq = Matrix2::identity() * params.resistance + l1 * omega;
    let di = current_derivative_ab(&i, omega, theta, u, params);

    let d_i = -l_inv * r_eq;
    let d_omega = -l_inv * (l1 * i + c_vec_prime(theta) * params.psi_r);
    // (L⁻¹)' = -L⁻¹ L' L⁻¹
    let l_inv_prime = -l_inv * l1 * l_inv;
    let d_theta = l_inv_prime * l * di - l_inv * (l2 * i - c_vec(theta) * params.psi_r) * omega;

    let mut jac = Matrix2x4::zeros();
    jac.fixed_view_mut::<2, 2>(0, 0).copy_from(&d_i);
    jac.fixed_view_mut::<2, 1>(0, 2).copy_from(&d_omega);
    jac.fixed_view_mut::<2, 1>(0, 3).copy_from(&d_theta);
    jac
}

/// `∂(y, ẏ)/∂x` for the electromechanical model, built from the analytic blocks.
pub fn obs_matrix_y1_ipmsm(x: &Vector4<f64>, u: &FrameVec, params: &MachineParams) -> Result<Matrix4<f64>> {
    let u = u.expect_frame(Frame::AlphaBeta)?;
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 1.0;
    m[(1, 1)] = 1.0;
    m.fixed_view_mut::<2, 4>(2, 0).copy_from(&current_rate_jacobian(x, &u, params));
    Ok(m)
}

/// Closed-form determinant of the first-order observability matrix, in rotor-frame quantities.
///
/// `di_dq` is the time derivative of the rotor-frame currents.
pub fn det_y1_ipmsm(i_dq: &FrameVec, di_dq: &FrameVec, omega: f64, params: &MachineParams) -> Result<f64> {
    let i = i_dq.expect_frame(Frame::Dq)?;
    let di = di_dq.expect_frame(Frame::Dq)?;
    let ld_lq = params.ld() * params.lq();
    let ldel = params.l_delta();
    let active_flux = ldel * i[0] + params.psi_r;
    let speed_term = (active_flux * active_flux + ldel * ldel * i[1] * i[1]) * omega / ld_lq;
    let saliency_term = ldel / ld_lq * (ldel * di[0] * i[1] - active_flux * di[1]);
    Ok(speed_term + saliency_term)
}

/// The fictitious observability vector in the rotor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityVector {
    /// Active flux, `Lδ i_d + ψr`.
    pub psi_d: f64,
    /// `Lδ i_q`.
    pub psi_q: f64,
    /// Phase of the vector in the rotor frame.
    pub theta_o: f64,
}

pub fn observability_vector(i_dq: &FrameVec, params: &MachineParams) -> Result<ObservabilityVector> {
    let i = i_dq.expect_frame(Frame::Dq)?;
    let ldel = params.l_delta();
    let psi_d = ldel * i[0] + params.psi_r;
    let psi_q = ldel * i[1];
    if psi_d == 0.0 && psi_q == 0.0 {
        return Err(Error::ZeroObservabilityVector);
    }
    Ok(ObservabilityVector { psi_d, psi_q, theta_o: psi_q.atan2(psi_d) })
}

/// `ω - dθ_O/dt`, with the phase rate taken analytically from the current derivative.
///
/// Zero exactly when the first-order determinant is zero, and of the same sign.
pub fn observability_margin(
    i_dq: &FrameVec,
    di_dq: &FrameVec,
    omega: f64,
    params: &MachineParams,
) -> Result<f64> {
    let ov = observability_vector(i_dq, params)?;
    let di = di_dq.expect_frame(Frame::Dq)?;
    let ldel = params.l_delta();
    let (dpd, dpq) = (ldel * di[0], ldel * di[1]);
    let norm2 = ov.psi_d * ov.psi_d + ov.psi_q * ov.psi_q;
    let phase_rate = (ov.psi_d * dpq - ov.psi_q * dpd) / norm2;
    Ok(omega - phase_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn determinant_examples() {
        let p = MachineParams::reference_ipmsm();
        let zero = FrameVec::dq(0.0, 0.0);
        let d = det_y1_ipmsm(&zero, &zero, 100.0, &p).unwrap();
        assert_relative_eq!(d, 126_562.5, max_relative = 1e-12);
        let d = det_y1_ipmsm(&FrameVec::dq(3.0, 15.0), &zero, 0.0, &p).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn non_salient_determinant_reduces_to_pm_flux_form() {
        let p = MachineParams::reference_spmsm();
        let d = det_y1_ipmsm(&FrameVec::dq(4.0, -2.0), &FrameVec::dq(100.0, 7.0), 30.0, &p).unwrap();
        assert_relative_eq!(d, 30.0 * (p.psi_r / p.l0).powi(2), max_relative = 1e-14);
    }

    #[test]
    fn observability_vector_examples() {
        let p = MachineParams::reference_ipmsm();
        let ov = observability_vector(&FrameVec::dq(0.0, 15.0), &p).unwrap();
        assert_relative_eq!(ov.psi_d, 0.0225, max_relative = 1e-14);
        assert_relative_eq!(ov.psi_q, -4.5e-3, max_relative = 1e-12);
        assert_relative_eq!(ov.theta_o, (-4.5e-3f64).atan2(0.0225), max_relative = 1e-12);
        assert!((ov.theta_o + 0.1974).abs() < 1e-4);

        let ps = MachineParams::reference_spmsm();
        let ov = observability_vector(&FrameVec::dq(9.0, -4.0), &ps).unwrap();
        assert_eq!((ov.psi_d, ov.psi_q, ov.theta_o), (ps.psi_r, 0.0, 0.0));

        let root = FrameVec::dq(-p.psi_r / p.l_delta(), 0.0);
        assert_eq!(observability_vector(&root, &p).unwrap_err(), Error::ZeroObservabilityVector);
        assert!(observability_margin(&root, &FrameVec::dq(0.0, 0.0), 1.0, &p).is_err());
    }

    #[test]
    fn margin_equals_speed_without_current_motion() {
        let p = MachineParams::reference_ipmsm();
        let m = observability_margin(&FrameVec::dq(1.0, 15.0), &FrameVec::dq(0.0, 0.0), 12.5, &p).unwrap();
        assert_eq!(m, 12.5);
        let ps = MachineParams::reference_spmsm();
        let m = observability_margin(&FrameVec::dq(1.0, 15.0), &FrameVec::dq(300.0, -50.0), -4.0, &ps).unwrap();
        assert_eq!(m, -4.0);
    }

    #[test]
    fn non_salient_theta_column_vanishes_at_rest() {
        let p = MachineParams::reference_spmsm();
        let m = obs_matrix_y1_ipmsm(&Vector4::new(0.0, 0.0, 0.0, 0.8), &FrameVec::alpha_beta(1.0, -1.0), &p).unwrap();
        assert!(m.column(3).iter().all(|&v| v == 0.0));
        assert_eq!(m.fixed_view::<2, 4>(0, 0), Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0));
    }
}
