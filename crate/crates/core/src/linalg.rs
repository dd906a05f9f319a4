//! Small dense helpers: numeric rank and relative comparisons.

use nalgebra::DMatrix;

/// Relative threshold on singular values, scaled by the largest one.
pub const RANK_RELATIVE_TOL: f64 = 1e-9;
/// Absolute threshold used when every singular value is zero.
pub const RANK_ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RankInfo {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

pub fn numeric_rank(m: &DMatrix<f64>) -> RankInfo {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let tol = if sigma_max > 0.0 { RANK_RELATIVE_TOL * sigma_max } else { RANK_ABSOLUTE_FLOOR };
    let rank = sv.iter().filter(|&&s| s > tol).count();
    RankInfo { singular_values: sv, rank }
}

/// `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
