//! Observability matrices, closed-form determinants and the observability vector.

pub mod alt_models;
pub mod ipmsm;
pub mod lie;
pub mod report;
pub mod spmsm;

pub use alt_models::{emf_model_det, emf_position_speed, flux_model_dets};
pub use ipmsm::{
    current_rate_jacobian, det_y1_ipmsm, obs_matrix_y1_ipmsm, observability_margin, observability_vector,
    ObservabilityVector,
};
pub use lie::{
    lie_gradient_stack, lie_gradient_stack_with, order_submatrix, ModelKind, ObservedModel, Precision, MAX_ORDER,
};
pub use report::ObservabilityReport;
pub use spmsm::{
    augmented_output_rank, augmented_output_stack, hfi_det_y1, spmsm_det_y1, spmsm_det_y2, spmsm_det_y3_at_sing,
    spmsm_standstill_stack, standstill_jerk, StandstillStack,
};
