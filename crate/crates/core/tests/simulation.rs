use std::f64::consts::PI;

use nalgebra::Vector2;
use pmsm_observability::control::InjectionSchedule;
use pmsm_observability::machine::{wrap_angle, FrameVec, MachineParams, MachineState};
use pmsm_observability::simulation::*;

fn step_scenario(kind: MachineKind, omega: f64) -> Scenario {
    Scenario {
        profile: SpeedProfile { breakpoints: vec![(0.0, omega)], theta0: 0.3 },
        injection: InjectionSchedule::none(),
        start_at_setpoint: false,
        t_end: 0.05,
        ..default_paper_scenario(kind)
    }
}

#[test]
fn current_step_settles_within_20_ms() {
    for kind in [MachineKind::Ipmsm, MachineKind::Spmsm] {
        let scn = step_scenario(kind, 0.0);
        let log = run_scenario_with(&scn, false).unwrap();
        let target = scn.setpoints.1;
        let settled = log.rows.iter().filter(|r| r.t >= 0.02).all(|r| (r.i_q - target).abs() <= 0.05 * target);
        assert!(settled, "{kind:?}");
        let last = log.rows.last().unwrap();
        assert!((last.i_q - target).abs() < 1e-3 * target, "{}", last.i_q);
        // at standstill the axes do not couple
        assert!(log.rows.iter().all(|r| r.i_d.abs() < 1e-9), "{kind:?}");
    }
}

#[test]
fn steady_state_matches_algebraic_solution() {
    let p = MachineParams::reference_ipmsm();
    let mut scn = step_scenario(MachineKind::Ipmsm, 50.0);
    scn.setpoints = (-3.0, 12.0);
    // cross-coupling is rejected at the electrical time constant, ~80 ms here
    scn.t_end = 0.6;
    let log = run_scenario_with(&scn, false).unwrap();
    let last = log.rows.last().unwrap();
    let (id, iq) = scn.setpoints;
    assert!((last.i_d - id).abs() < 1e-3 * iq && (last.i_q - iq).abs() < 1e-3 * iq, "{} {}", last.i_d, last.i_q);
    let w = 50.0;
    // the held αβ voltage acts, on average, at the mid-sample rotor position
    let v_dq = FrameVec::alpha_beta(last.v_alpha, last.v_beta).park(last.theta_true + 0.5 * w * scn.ts).unwrap().v;
    let vd = p.resistance * id - w * p.lq() * iq;
    let vq = p.resistance * iq + w * (p.ld() * id + p.psi_r);
    assert!((v_dq[0] - vd).abs() < 1e-3 * vd.abs(), "{} vs {vd}", v_dq[0]);
    assert!((v_dq[1] - vq).abs() < 1e-3 * vq.abs(), "{} vs {vq}", v_dq[1]);
}

fn integrate(dt: f64, t_end: f64) -> Vector2<f64> {
    let p = MachineParams::reference_ipmsm();
    let profile = SpeedProfile { breakpoints: vec![(0.0, 20.0), (0.01, 80.0)], theta0: 0.0 };
    let v = Vector2::new(1.0, -0.5);
    let mut s = MachineState { i_alpha: 2.0, i_beta: 1.0, ..MachineState::default() };
    let n = (t_end / dt).round() as usize;
    for k in 0..n {
        s = integrate_electrical(&s, &v, &profile, k as f64 * dt, dt, &p).unwrap();
    }
    Vector2::new(s.i_alpha, s.i_beta)
}

#[test]
fn rk4_converges_at_fourth_order() {
    let reference = integrate(1e-6, 0.008);
    let errs: Vec<f64> = [8e-5, 4e-5, 2e-5].iter().map(|&dt| (integrate(dt, 0.008) - reference).norm()).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.7 && order < 4.3, "observed order {order} from {errs:?}");
    }
}

#[test]
fn position_is_integral_of_speed() {
    let p = SpeedProfile::reference();
    let dt = 1e-4;
    let (mut theta, mut prev) = (p.theta0, p.omega(0.0));
    for k in 1..=10_000 {
        let t = k as f64 * dt;
        let w = p.omega(t);
        theta += 0.5 * (prev + w) * dt;
        prev = w;
        assert!((theta - p.theta(t)).abs() < 1e-9, "t = {t}: {theta} vs {}", p.theta(t));
    }
}

#[test]
fn log_rows_are_frame_consistent() {
    let mut scn = default_paper_scenario(MachineKind::Ipmsm);
    scn.t_end = 0.7;
    scn.ts = 1e-3;
    let log = run_scenario(&scn).unwrap();
    for r in &log.rows {
        let dq = FrameVec::alpha_beta(r.i_alpha, r.i_beta).park(r.theta_true).unwrap().v;
        assert!((dq[0] - r.i_d).abs() < 1e-12 && (dq[1] - r.i_q).abs() < 1e-12, "t = {}", r.t);
        assert!(r.theta_true > -PI && r.theta_true <= PI);
        let err = wrap_angle(r.theta_hat - r.theta_true);
        assert!(wrap_angle(err - r.theta_err).abs() < 1e-12, "t = {}", r.t);
    }
}

#[test]
fn single_sample_run() {
    let mut scn = default_paper_scenario(MachineKind::Spmsm);
    scn.t_end = scn.ts;
    let log = run_scenario(&scn).unwrap();
    assert_eq!(log.rows.len(), 1);
    assert_eq!(log.rows[0].t, 0.0);
    assert!(log.abort.is_none());
}

#[test]
fn invalid_scenario_lists_every_problem() {
    let mut scn = default_paper_scenario(MachineKind::Ipmsm);
    scn.t_end = -1.0;
    scn.ode_substeps = 0;
    scn.noise_std = f64::NAN;
    match run_scenario(&scn).unwrap_err() {
        pmsm_observability::Error::InvalidScenario(v) => assert_eq!(v.len(), 3, "{v:?}"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn noise_is_seeded() {
    let mut scn = default_paper_scenario(MachineKind::Ipmsm);
    scn.t_end = 0.01;
    scn.noise_std = 0.1;
    let a = run_scenario(&scn).unwrap();
    let b = run_scenario(&scn).unwrap();
    scn.seed += 1;
    let c = run_scenario(&scn).unwrap();
    assert_eq!(pmsm_observability::output::trajectory_csv_string(&a.rows), pmsm_observability::output::trajectory_csv_string(&b.rows));
    assert_ne!(a.rows.last().unwrap().theta_hat, c.rows.last().unwrap().theta_hat);
}
