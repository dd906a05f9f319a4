//! Back-EMF and rotor-flux state models of the non-salient machine.

use crate::error::{Error, Result};
use crate::machine::MachineParams;

/// First-order determinant of the back-EMF model, `1/L0²`, at every state.
pub fn emf_model_det(params: &MachineParams) -> f64 {
    1.0 / (params.l0 * params.l0)
}

/// Position and speed recovered from the back-EMF vector.
///
/// `theta = atan2(-e_alpha, e_beta)` and `omega = |e| / ψr`, so the speed is a
/// magnitude and the position is exact for positive rotation. At zero EMF the
/// position is indeterminate.
pub fn emf_position_speed(e_alpha: f64, e_beta: f64, params: &MachineParams) -> Result<(f64, f64)> {
    if e_alpha == 0.0 && e_beta == 0.0 {
        return Err(Error::IndeterminatePosition);
    }
    let theta = (-e_alpha).atan2(e_beta);
    let omega = e_alpha.hypot(e_beta) / params.psi_r;
    Ok((theta, omega))
}

/// First-, second- and third-order determinants of the flux model.
pub fn flux_model_dets(omega: f64, params: &MachineParams) -> (f64, f64, f64) {
    let (r, l0) = (params.resistance, params.l0);
    let w2 = omega * omega;
    let d1 = w2 / (l0 * l0);
    let d2 = w2 / l0.powi(4) * (r * r + l0 * l0 * w2);
    let d3 = w2 / l0.powi(6) * (r.powi(4) + l0.powi(4) * w2 * w2 - r * r * l0 * l0 * w2);
    (d1, d2, d3)
}
