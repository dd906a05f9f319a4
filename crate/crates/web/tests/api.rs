use pmsm_obs_web::{analyze_point, hfi_map, simulate, TRACE_COLUMNS};

#[test]
fn standstill_spmsm_point_is_rank_deficient() {
    let r = analyze_point("spmsm", 0.0, 15.0, 0.0, 0.3).unwrap();
    assert_eq!(r.len(), 11);
    assert_eq!(r[3], 3.0);
    // constant currents at standstill carry no position information even with saliency
    assert_eq!(analyze_point("ipmsm", 0.0, 15.0, 0.0, 0.3).unwrap()[3], 3.0);
    assert_eq!(analyze_point("ipmsm", 0.0, 15.0, 20.0, 0.3).unwrap()[3], 4.0);
}

#[test]
fn hfi_map_vanishes_only_without_position_error() {
    let (rows, cols) = (5, 7);
    let d = hfi_map(5.0, 1000.0, 0.0, rows, cols).unwrap();
    assert_eq!(d.len(), rows * cols);
    // the middle row is θ̃ = 0
    assert!(d[2 * cols..3 * cols].iter().all(|v| v.abs() < 1e-9));
    assert!(d[cols] != 0.0);
}

#[test]
fn decimated_trace_has_expected_shape() {
    let d = simulate("ipmsm", -0.785, 0.5, 100).unwrap();
    assert_eq!(d.len() % TRACE_COLUMNS, 0);
    assert_eq!(d.len() / TRACE_COLUMNS, 100);
    assert_eq!(d[TRACE_COLUMNS], 0.01);
}
