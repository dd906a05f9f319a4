use nalgebra::{Vector2, Vector4};

use crate::error::Result;
use crate::linalg::numeric_rank;
use crate::machine::{alphabeta_rate_to_dq, current_derivative_ab, FrameVec, MachineParams, MachineState, Mechanics};

use super::ipmsm::{det_y1_ipmsm, observability_margin, observability_vector};
use super::lie::{lie_gradient_stack, ObservedModel};
use super::spmsm::{spmsm_det_y2, spmsm_det_y3_at_sing};

/// Observability indicators at one instant of a trajectory.
///
/// Quantities without a closed form for the given machine are `NaN`:
/// `det_y2` is only known for the non-salient machine, `det_y3` only where
/// `ω = 0` and `dω/dt = 0`, and the observability-vector fields when that
/// vector is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub time: f64,
    pub det_y1: f64,
    pub det_y2: f64,
    pub det_y3: f64,
    /// Of the order-3 stack, descending.
    pub singular_values: Vec<f64>,
    pub numeric_rank: usize,
    pub psi_o_d: f64,
    pub psi_o_q: f64,
    pub theta_o: f64,
    pub margin: f64,
}

impl ObservabilityReport {
    /// Evaluates every indicator at `state`, with the input `v_ab` held and
    /// the speed driven externally at `acceleration`.
    pub fn evaluate(
        time: f64,
        state: &MachineState,
        v_ab: &Vector2<f64>,
        acceleration: f64,
        params: &MachineParams,
    ) -> Result<Self> {
        let i_ab = Vector2::new(state.i_alpha, state.i_beta);
        let (omega, theta) = (state.omega, state.theta);
        let di_ab = current_derivative_ab(&i_ab, omega, theta, v_ab, params);
        let i_dq = state.currents().park(theta)?;
        let rate = alphabeta_rate_to_dq(&i_ab, &di_ab, omega, theta);
        let di_dq = FrameVec::dq(rate[0], rate[1]);

        let det_y1 = det_y1_ipmsm(&i_dq, &di_dq, omega, params)?;
        let (det_y2, det_y3) = if params.is_salient() {
            (f64::NAN, f64::NAN)
        } else {
            let d2 = spmsm_det_y2(omega, acceleration, i_dq.v[0], params)?;
            let d3 = if omega == 0.0 && acceleration == 0.0 {
                spmsm_det_y3_at_sing(i_dq.v[0], di_dq.v[1], params)?
            } else {
                f64::NAN
            };
            (d2, d3)
        };

        let model = ObservedModel::Electromechanical {
            params: *params,
            mechanics: Mechanics::ImposedSpeed { acceleration },
        };
        let x = Vector4::new(state.i_alpha, state.i_beta, omega, theta);
        let stack = lie_gradient_stack(&model, &x, v_ab, 3)?;
        let rank = numeric_rank(&stack);

        let (psi_o_d, psi_o_q, theta_o, margin) = match observability_vector(&i_dq, params) {
            Ok(ov) => (ov.psi_d, ov.psi_q, ov.theta_o, observability_margin(&i_dq, &di_dq, omega, params)?),
            Err(_) => (0.0, 0.0, f64::NAN, f64::NAN),
        };

        Ok(Self {
            time,
            det_y1,
            det_y2,
            det_y3,
            singular_values: rank.singular_values,
            numeric_rank: rank.rank,
            psi_o_d,
            psi_o_q,
            theta_o,
            margin,
        })
    }
}
