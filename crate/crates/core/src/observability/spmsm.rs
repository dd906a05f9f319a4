//! Closed-form observability results for the non-salient machine.

use nalgebra::{DMatrix, SMatrix};

use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, RankInfo};
use crate::machine::MachineParams;

/// `Δ_y1 = ω (ψr/L0)²`.
pub fn spmsm_det_y1(omega: f64, params: &MachineParams) -> Result<f64> {
    params.require_non_salient()?;
    Ok(omega * (params.psi_r / params.l0).powi(2))
}

/// Determinant of the output rows plus the second-derivative rows, for the
/// Newton-law mechanics.
pub fn spmsm_det_y2(omega: f64, domega: f64, i_d: f64, params: &MachineParams) -> Result<f64> {
    params.require_non_salient()?;
    let (r, l0, psi) = (params.resistance, params.l0, params.psi_r);
    let p = params.pole_pairs as f64;
    let k = psi * psi / (l0 * l0);
    let bracket = (2.0 * omega * omega + r * r / (l0 * l0) + 3.0 * p * p / params.inertia * psi * i_d) * omega
        - r / l0 * domega;
    Ok(k * bracket)
}

/// `d²ω/dt²` at standstill with constant load: `(3p²/2J) ψr di_q/dt`.
pub fn standstill_jerk(di_q: f64, params: &MachineParams) -> f64 {
    let p = params.pole_pairs as f64;
    1.5 * p * p / params.inertia * params.psi_r * di_q
}

/// Third-order determinant evaluated where the second-order one vanishes
/// (`ω = 0`, `dω/dt = 0`, constant load torque).
pub fn spmsm_det_y3_at_sing(i_d: f64, di_q: f64, params: &MachineParams) -> Result<f64> {
    params.require_non_salient()?;
    let (r, l0, psi) = (params.resistance, params.l0, params.psi_r);
    let p = params.pole_pairs as f64;
    let k = psi * psi / (l0 * l0);
    let bracket = r * r / (l0 * l0) - 1.5 * p * p / params.inertia * (l0 * i_d + psi) * psi / l0;
    Ok(k * bracket * standstill_jerk(di_q, params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandstillStack {
    pub matrix: SMatrix<f64, 8, 4>,
    pub rank: RankInfo,
}

/// The order-3 observability matrix of the non-salient machine when `ω ≡ 0`.
///
/// Each derivative-order block is `-R/L0` times the previous one and the
/// position column is identically zero.
pub fn spmsm_standstill_stack(params: &MachineParams, theta: f64) -> Result<StandstillStack> {
    params.require_non_salient()?;
    let a = -params.resistance / params.l0;
    let k = params.psi_r / params.l0;
    let (s, c) = theta.sin_cos();
    let mut m = SMatrix::<f64, 8, 4>::zeros();
    m[(0, 0)] = 1.0;
    m[(1, 1)] = 1.0;
    for order in 1..4 {
        let g = a.powi(order as i32);
        let pm = a.powi(order as i32 - 1);
        m[(2 * order, 0)] = g;
        m[(2 * order + 1, 1)] = g;
        m[(2 * order, 2)] = pm * k * s;
        m[(2 * order + 1, 2)] = -pm * k * c;
    }
    let rank = numeric_rank(&DMatrix::from_column_slice(8, 4, m.as_slice()));
    Ok(StandstillStack { matrix: m, rank })
}

/// Modified first-order determinant under a d̂-axis voltage injection
/// `V_hf cos(ω_hf t)` with position estimation error `theta_err`.
pub fn hfi_det_y1(
    omega: f64,
    theta_err: f64,
    t: f64,
    v_hf: f64,
    omega_hf: f64,
    params: &MachineParams,
) -> Result<f64> {
    params.require_non_salient()?;
    let (l0, psi) = (params.l0, params.psi_r);
    Ok(-(psi * psi) / (l0 * l0) * omega + psi / (l0 * l0) * v_hf * (omega_hf * t).cos() * theta_err.sin())
}

/// Standstill stack with an extra output `g(θ) = aθ + b`, whose gradient is `[0 0 0 a]`.
pub fn augmented_output_stack(params: &MachineParams, theta: f64, a: f64) -> Result<(DMatrix<f64>, RankInfo)> {
    let base = spmsm_standstill_stack(params, theta)?;
    let mut m = DMatrix::zeros(9, 4);
    m.view_mut((0, 0), (8, 4)).copy_from(&base.matrix);
    m[(8, 3)] = a;
    let rank = numeric_rank(&m);
    Ok((m, rank))
}

/// Rank of the standstill stack augmented with the position-dependent output.
/// The offset `b` has zero gradient and does not enter.
pub fn augmented_output_rank(params: &MachineParams, theta: f64, a: f64, _b: f64) -> Result<usize> {
    if a == 0.0 {
        return Err(Error::DegenerateOutputSlope);
    }
    Ok(augmented_output_stack(params, theta, a)?.1.rank)
}
