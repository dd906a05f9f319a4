use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use pmsm_observability::control::{controller_step, ControlConfig, CurrentController, InjectionSchedule};
use pmsm_observability::estimator::*;
use pmsm_observability::machine::{FrameVec, MachineParams, MachineState, Mechanics};
use pmsm_observability::simulation::{integrate_electrical, SpeedProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn models() -> [EkfModel; 2] {
    let params = MachineParams::reference_ipmsm();
    [
        EkfModel { params, mechanics: Mechanics::ImposedSpeed { acceleration: 0.0 } },
        EkfModel { params, mechanics: Mechanics::Newton { load_torque: 0.2 } },
    ]
}

fn filter(x: Vector4<f64>) -> EkfState {
    EkfState::new(
        x,
        Matrix4::identity(),
        Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1e3, 0.1)),
        Matrix2::identity(),
        1e-4,
    )
    .unwrap()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for model in models() {
        for _ in 0..50 {
            let x = Vector4::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-100.0..100.0),
                rng.random_range(-3.0..3.0),
            );
            let u = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let (a, _) = linearize(&model, &x, &u);
            for j in 0..4 {
                let h = 1e-6 * x[j].abs().max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let col = (model.f(&xp, &u) - model.f(&xm, &u)) / (2.0 * h);
                for i in 0..4 {
                    let scale = a.row(i).abs().max().max(1e-12);
                    let e = (col[i] - a[(i, j)]).abs() / scale;
                    assert!(e < 1e-5, "A[{i},{j}] = {} vs {} ({e})", a[(i, j)], col[i]);
                }
            }
        }
    }
}

#[test]
fn update_never_increases_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = models()[0];
    let mut ekf = filter(Vector4::new(1.0, 2.0, 10.0, 0.3));
    for _ in 0..500 {
        let u = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let y = Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let pred = predict(&ekf, &model, &u).unwrap();
        let upd = gain_and_innovate(&pred, &y).unwrap();
        assert!(upd.p.trace() <= pred.p.trace() * (1.0 + 1e-14), "{} > {}", upd.p.trace(), pred.p.trace());
        ekf = upd;
    }
}

/// Closed-loop plant at constant speed with slowly varying set-points and
/// noisy currents, starting in steady state.
fn long_run(steps: usize, seed: u64) -> Vec<EkfState> {
    let params = MachineParams::reference_ipmsm();
    let model = models()[0];
    let profile = SpeedProfile { breakpoints: vec![(0.0, 30.0)], theta0: 0.4 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let i0 = FrameVec::dq(0.0, 10.0).inverse_park(0.4).unwrap().v;
    let mut state = MachineState { i_alpha: i0[0], i_beta: i0[1], omega: 30.0, theta: 0.4, load_torque: 0.0 };
    let mut ctrl = CurrentController::new(&params, &ControlConfig::default());
    ctrl.d.integrator = -30.0 * params.lq() * 10.0;
    ctrl.q.integrator = params.resistance * 10.0 + 30.0 * params.psi_r;
    let mut ekf = filter(Vector4::new(i0[0], i0[1], 30.0, 0.6));
    let mut u = Vector2::zeros();
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * 1e-4;
        let refs = (2.0 * (3.0 * t).sin(), 10.0 + 3.0 * (8.0 * t).sin());
        let y = Vector2::new(state.i_alpha + noise.sample(&mut rng), state.i_beta + noise.sample(&mut rng));
        if k > 0 {
            ekf = ekf_step(&ekf, &model, &u, &y).unwrap();
        }
        let i_dq = state.currents().park(state.theta).unwrap().v;
        let (v, next) = controller_step(&ctrl, &i_dq, refs, state.theta, 1e-4, t, &InjectionSchedule::none(), 0.0);
        ctrl = next;
        u = v.v;
        state = integrate_electrical(&state, &u, &profile, t, 1e-4, &params).unwrap();
        out.push(ekf.clone());
    }
    out
}

#[test]
fn covariance_stays_symmetric_with_non_negative_diagonal() {
    for e in long_run(100_000, 3) {
        assert!((e.p - e.p.transpose()).abs().max() < 1e-12);
        assert!(e.p.diagonal().min() >= 0.0, "{}", e.p);
    }
}

#[test]
fn filter_is_deterministic() {
    let a = long_run(3000, 4);
    let b = long_run(3000, 4);
    assert!(a.iter().zip(&b).all(|(x, y)| x.x_hat == y.x_hat && x.p == y.p));
}

#[test]
fn exact_model_keeps_exact_estimate() {
    let model = models()[0];
    let mut x = Vector4::new(3.0, -4.0, 40.0, 0.2);
    let mut ekf = filter(x);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let u = Vector2::new((k as f64 * 0.01).sin(), (k as f64 * 0.013).cos());
        x += model.f(&x, &u) * 1e-4;
        ekf = ekf_step(&ekf, &model, &u, &Vector2::new(x[0], x[1])).unwrap();
        worst = worst.max((ekf.x_hat - x).abs().max());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn invalid_filter_settings_are_all_reported() {
    let mut q = Matrix4::identity();
    q[(0, 0)] = -1.0;
    let err = EkfState::new(Vector4::zeros(), Matrix4::identity(), q, Matrix2::zeros(), 0.0).unwrap_err();
    match err {
        pmsm_observability::Error::InvalidScenario(v) => assert_eq!(v.len(), 3, "{v:?}"),
        e => panic!("{e:?}"),
    }
}
