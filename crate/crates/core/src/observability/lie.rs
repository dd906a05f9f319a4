//! Finite-difference construction of the observability matrix.
//!
//! Row block `k` of the stack is `∂(L_f^k h)/∂x`. The output map selects the
//! currents, so `L_f^0 h` and `L_f^1 h = f_I` are exact; every further Lie
//! derivative is a central directional difference of the previous one along
//! `f`, and the gradient is a central difference per state component. All
//! differences use the fourth-order five-point stencil. Nothing
//! here uses the closed-form expressions, so this is the reference the
//! analytic results are checked against.

use nalgebra::{DMatrix, Vector2, Vector4};
use num_traits::Float;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::machine::{j2, state_derivative, MachineParams, Mechanics};

/// Highest Lie derivative order supported by [`lie_gradient_stack`].
pub const MAX_ORDER: usize = 3;

/// Relative step per derivative order in `f64`. Order `k` stacks `k`
/// differences; the steps trade the `h⁴` truncation against round-off that
/// grows like `h⁻ᵏ`, and were tuned against the closed forms.
const REL_STEP: [f64; MAX_ORDER] = [1e-3, 4e-3, 3e-2];

/// Same for double-double arithmetic, whose transcendental functions are good
/// to about `1e-21`.
const REL_STEP_DD: [f64; MAX_ORDER] = [1e-4, 3e-4, 1e-3];

/// Five-point first-derivative stencil as antisymmetric pairs: `Σ w (g(+k h) - g(-k h)) / h`.
/// Differencing each pair first keeps a derivative that is exactly zero, zero.
const STENCIL: [(f64, f64); 2] = [(1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Electromechanical,
    BackEmf,
    Flux,
}

/// A four-state model with the stator currents as output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservedModel {
    /// `x = [i_alpha, i_beta, omega, theta]`.
    Electromechanical { params: MachineParams, mechanics: Mechanics },
    /// `x = [i_alpha, i_beta, e_alpha, e_beta]`; speed and acceleration are known inputs.
    BackEmf { params: MachineParams, omega: f64, domega: f64 },
    /// `x = [i_alpha, i_beta, psi_alpha, psi_beta]`; speed is a known input.
    Flux { params: MachineParams, omega: f64 },
}

impl ObservedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Electromechanical { .. } => ModelKind::Electromechanical,
            Self::BackEmf { .. } => ModelKind::BackEmf,
            Self::Flux { .. } => ModelKind::Flux,
        }
    }

    pub fn state_dim(&self) -> usize {
        4
    }

    pub fn output(&self, x: &Vector4<f64>) -> Vector2<f64> {
        Vector2::new(x[0], x[1])
    }

    pub fn dynamics(&self, x: &Vector4<f64>, u: &Vector2<f64>) -> Result<Vector4<f64>> {
        let dx = match *self {
            Self::Electromechanical { params, mechanics } => state_derivative(x, u, &params, mechanics),
            Self::BackEmf { params, omega, domega } => {
                if omega == 0.0 {
                    return Err(Error::ZeroSpeedSingularity);
                }
                let i = Vector2::new(x[0], x[1]);
                let e = Vector2::new(x[2], x[3]);
                let di = (u - i * params.resistance - e) / params.l0;
                let de = e * (domega / omega) + j2() * e * omega;
                Vector4::new(di[0], di[1], de[0], de[1])
            }
            Self::Flux { params, omega } => {
                let i = Vector2::new(x[0], x[1]);
                let psi = Vector2::new(x[2], x[3]);
                let rot = j2() * psi * omega;
                let di = (u - i * params.resistance - rot) / params.l0;
                Vector4::new(di[0], di[1], rot[0], rot[1])
            }
        };
        if dx.iter().all(|v| v.is_finite()) {
            Ok(dx)
        } else {
            Err(Error::NonFinite("model dynamics"))
        }
    }
}

/// Scalar arithmetic used for the nested differences.
///
/// Three stacked five-point differences amplify round-off by roughly `h⁻³`, so
/// in plain `f64` the third-order block is good to about `1e-4` relative. The
/// double-double variant evaluates the model in ~32 significant digits and
/// brings every block to `1e-9` or better, at about fifty times the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Double,
    DoubleDouble,
}

impl Precision {
    fn rel_steps(self) -> [f64; MAX_ORDER] {
        match self {
            Precision::Double => REL_STEP,
            Precision::DoubleDouble => REL_STEP_DD,
        }
    }
}

fn lift<T: Float>(v: f64) -> T {
    T::from(v).expect("f64 converts to every supported scalar")
}

/// Model dynamics in an arbitrary float type. Mirrors
/// [`ObservedModel::dynamics`]; the two are kept equal by a test.
fn dynamics_t<T: Float>(model: &ObservedModel, x: &[T; 4], u: &Vector2<f64>) -> Result<[T; 4]> {
    let (ux, uy) = (lift::<T>(u[0]), lift::<T>(u[1]));
    let out = match *model {
        ObservedModel::Electromechanical { params, mechanics } => {
            let [ia, ib, w, th] = *x;
            let (r, l0, l2, psi) =
                (lift::<T>(params.resistance), lift::<T>(params.l0), lift::<T>(params.l2), lift::<T>(params.psi_r));
            let two = lift::<T>(2.0);
            let (s, c) = (th.sin(), th.cos());
            let (s2, c2) = ((two * th).sin(), (two * th).cos());
            // v - (R + ωL')i - ψr ω C'(θ)
            let rx = ux - r * ia - w * two * l2 * (-s2 * ia + c2 * ib) + psi * w * s;
            let ry = uy - r * ib - w * two * l2 * (c2 * ia + s2 * ib) - psi * w * c;
            let det = l0 * l0 - l2 * l2;
            let dia = ((l0 - l2 * c2) * rx - l2 * s2 * ry) / det;
            let dib = (-l2 * s2 * rx + (l0 + l2 * c2) * ry) / det;
            let dw = match mechanics {
                Mechanics::Newton { load_torque } => {
                    let pm = psi * (ib * c - ia * s);
                    let rel = l2 * ((ia * ia - ib * ib) * s2 - two * ia * ib * c2);
                    let tm = lift::<T>(1.5 * params.pole_pairs as f64) * (pm - rel);
                    lift::<T>(params.pole_pairs as f64 / params.inertia) * (tm - lift::<T>(load_torque))
                }
                Mechanics::ImposedSpeed { acceleration } => lift(acceleration),
            };
            [dia, dib, dw, w]
        }
        ObservedModel::BackEmf { params, omega, domega } => {
            if omega == 0.0 {
                return Err(Error::ZeroSpeedSingularity);
            }
            let [ia, ib, ea, eb] = *x;
            let (r, l0, w) = (lift::<T>(params.resistance), lift::<T>(params.l0), lift::<T>(omega));
            let g = lift::<T>(domega) / w;
            [(ux - r * ia - ea) / l0, (uy - r * ib - eb) / l0, g * ea - w * eb, g * eb + w * ea]
        }
        ObservedModel::Flux { params, omega } => {
            let [ia, ib, pa, pb] = *x;
            let (r, l0, w) = (lift::<T>(params.resistance), lift::<T>(params.l0), lift::<T>(omega));
            let (rot_a, rot_b) = (-w * pb, w * pa);
            [(ux - r * ia - rot_a) / l0, (uy - r * ib - rot_b) / l0, rot_a, rot_b]
        }
    };
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite("model dynamics"))
    }
}

fn scale(x: &Vector4<f64>) -> Vector4<f64> {
    x.map(|v| v.abs().max(1.0))
}

/// Step along `f` that moves no component by more than `rel_step` of its scale.
/// Fixed at the expansion point so that it does not vary with the perturbations.
fn directional_step(f: &Vector4<f64>, x: &Vector4<f64>, rel_step: f64) -> f64 {
    let s = scale(x);
    let reach = (0..4).map(|j| f[j].abs() / s[j]).fold(0.0, f64::max);
    if reach == 0.0 {
        0.0
    } else {
        rel_step / reach
    }
}

/// `L_f^k h(x)` with the input held constant.
fn lie_derivative<T: Float>(model: &ObservedModel, x: &[T; 4], u: &Vector2<f64>, k: usize, eps: T) -> Result<[T; 2]> {
    match k {
        0 => Ok([x[0], x[1]]),
        1 => {
            let f = dynamics_t(model, x, u)?;
            Ok([f[0], f[1]])
        }
        _ => {
            if eps == T::zero() {
                return Ok([T::zero(); 2]);
            }
            let f = dynamics_t(model, x, u)?;
            let mut acc = [T::zero(); 2];
            for (offset, weight) in STENCIL {
                let step = lift::<T>(offset) * eps;
                let plus = [x[0] + f[0] * step, x[1] + f[1] * step, x[2] + f[2] * step, x[3] + f[3] * step];
                let minus = [x[0] - f[0] * step, x[1] - f[1] * step, x[2] - f[2] * step, x[3] - f[3] * step];
                let dp = lie_derivative(model, &plus, u, k - 1, eps)?;
                let dm = lie_derivative(model, &minus, u, k - 1, eps)?;
                acc[0] = acc[0] + (dp[0] - dm[0]) * lift(weight);
                acc[1] = acc[1] + (dp[1] - dm[1]) * lift(weight);
            }
            Ok([acc[0] / eps, acc[1] / eps])
        }
    }
}

/// Gradient of `L_f^k h` at `x`, a 2×4 block.
fn lie_gradient<T: Float>(
    model: &ObservedModel,
    x: &Vector4<f64>,
    u: &Vector2<f64>,
    k: usize,
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let mut block = DMatrix::zeros(2, 4);
    if k == 0 {
        block[(0, 0)] = 1.0;
        block[(1, 1)] = 1.0;
        return Ok(block);
    }
    let f = model.dynamics(x, u)?;
    let eps = lift::<T>(directional_step(&f, x, rel_step));
    let s = scale(x);
    for j in 0..4 {
        let h = lift::<T>(rel_step * s[j]);
        let mut d = [T::zero(); 2];
        for (offset, weight) in STENCIL {
            let base = [lift::<T>(x[0]), lift(x[1]), lift(x[2]), lift(x[3])];
            let (mut plus, mut minus) = (base, base);
            plus[j] = plus[j] + lift::<T>(offset) * h;
            minus[j] = minus[j] - lift::<T>(offset) * h;
            let lp = lie_derivative(model, &plus, u, k, eps)?;
            let lm = lie_derivative(model, &minus, u, k, eps)?;
            d[0] = d[0] + (lp[0] - lm[0]) * lift(weight);
            d[1] = d[1] + (lp[1] - lm[1]) * lift(weight);
        }
        block[(0, j)] = (d[0] / h).to_f64().unwrap_or(f64::NAN);
        block[(1, j)] = (d[1] / h).to_f64().unwrap_or(f64::NAN);
    }
    Ok(block)
}

/// Stacked gradients of `L_f^0 h … L_f^orders h`, a `2(orders+1) × 4` matrix,
/// computed in `f64`.
pub fn lie_gradient_stack(
    model: &ObservedModel,
    x: &Vector4<f64>,
    u: &Vector2<f64>,
    orders: usize,
) -> Result<DMatrix<f64>> {
    lie_gradient_stack_with(model, x, u, orders, Precision::Double)
}

pub fn lie_gradient_stack_with(
    model: &ObservedModel,
    x: &Vector4<f64>,
    u: &Vector2<f64>,
    orders: usize,
    precision: Precision,
) -> Result<DMatrix<f64>> {
    if orders > MAX_ORDER {
        return Err(Error::UnsupportedOrder(orders));
    }
    model.dynamics(x, u)?;
    let steps = precision.rel_steps();
    let mut stack = DMatrix::zeros(2 * (orders + 1), 4);
    for k in 0..=orders {
        let rel = if k == 0 { 0.0 } else { steps[k - 1] };
        let block = match precision {
            Precision::Double => lie_gradient::<f64>(model, x, u, k, rel)?,
            Precision::DoubleDouble => lie_gradient::<TwoFloat>(model, x, u, k, rel)?,
        };
        stack.view_mut((2 * k, 0), (2, 4)).copy_from(&block);
    }
    if stack.iter().all(|v| v.is_finite()) {
        Ok(stack)
    } else {
        Err(Error::NonFinite("observability stack"))
    }
}

/// The 4×4 sub-matrix made of the output rows and the rows of derivative order `k`.
pub fn order_submatrix(stack: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(4, 4);
    m.view_mut((0, 0), (2, 4)).copy_from(&stack.rows(0, 2));
    m.view_mut((2, 0), (2, 4)).copy_from(&stack.rows(2 * k, 2));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::MachineParams;

    fn standstill_model() -> ObservedModel {
        ObservedModel::Electromechanical {
            params: MachineParams::reference_spmsm(),
            mechanics: Mechanics::ImposedSpeed { acceleration: 0.0 },
        }
    }

    #[test]
    fn order_zero_block_is_output_selector() {
        let x = Vector4::new(1.0, 2.0, 3.0, 0.4);
        let stack = lie_gradient_stack(&standstill_model(), &x, &Vector2::new(0.1, 0.2), 0).unwrap();
        assert_eq!(stack.nrows(), 2);
        assert_eq!(stack.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(stack.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn order_above_three_is_rejected() {
        let x = Vector4::new(1.0, 2.0, 0.0, 0.4);
        let err = lie_gradient_stack(&standstill_model(), &x, &Vector2::zeros(), 4).unwrap_err();
        assert_eq!(err, Error::UnsupportedOrder(4));
    }

    #[test]
    fn back_emf_model_is_singular_at_zero_speed() {
        let m = ObservedModel::BackEmf { params: MachineParams::reference_spmsm(), omega: 0.0, domega: 0.0 };
        let err = lie_gradient_stack(&m, &Vector4::zeros(), &Vector2::zeros(), 1).unwrap_err();
        assert_eq!(err, Error::ZeroSpeedSingularity);
    }

    #[test]
    fn generic_dynamics_match_model_dynamics() {
        let ip = MachineParams::reference_ipmsm();
        let models = [
            ObservedModel::Electromechanical { params: ip, mechanics: Mechanics::Newton { load_torque: 0.4 } },
            ObservedModel::Electromechanical { params: ip, mechanics: Mechanics::ImposedSpeed { acceleration: 3.0 } },
            ObservedModel::BackEmf { params: MachineParams::reference_spmsm(), omega: 12.0, domega: -4.0 },
            ObservedModel::Flux { params: MachineParams::reference_spmsm(), omega: -7.0 },
        ];
        let x = Vector4::new(3.0, -11.0, 42.0, 2.1);
        let u = Vector2::new(1.5, -0.7);
        for m in models {
            let a = m.dynamics(&x, &u).unwrap();
            let b = dynamics_t::<f64>(&m, &[x[0], x[1], x[2], x[3]], &u).unwrap();
            let c = dynamics_t::<TwoFloat>(&m, &x.map(TwoFloat::from).into(), &u).unwrap();
            for j in 0..4 {
                let tol = 1e-12 * a[j].abs().max(1.0);
                assert!((a[j] - b[j]).abs() <= tol, "{m:?} component {j}");
                assert!((a[j] - c[j].hi()).abs() <= tol, "{m:?} component {j}");
            }
        }
    }

    #[test]
    fn standstill_theta_column_is_exactly_zero() {
        let x = Vector4::new(0.3, 14.0, 0.0, 1.234);
        let stack = lie_gradient_stack(&standstill_model(), &x, &Vector2::new(0.01, 0.15), 3).unwrap();
        assert!(stack.column(3).iter().all(|&v| v == 0.0));
        let dd = lie_gradient_stack_with(&standstill_model(), &x, &Vector2::new(0.01, 0.15), 3, Precision::DoubleDouble)
            .unwrap();
        assert!(dd.column(3).iter().all(|&v| v == 0.0));
    }
}
