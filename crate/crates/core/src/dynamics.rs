//! Planar rigid-body flight dynamics and the RK4 step.
//!
//! State is `[x, y, theta, u, v, omega]` augmented with mass and the lagged
//! gimbal angle. Everything is nondimensional (see [`crate::scenario`]).
//! The body axis `(cos theta, sin theta)` points from the base to the nose;
//! the engine gimbals at the base on that axis.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::aero::AeroModel;
use crate::autodiff::Real;
use crate::error::NumericError;
use crate::scenario::NondimScenario;

/// Speeds below this are treated as zero relative wind.
pub const MIN_SPEED: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState<S = f64> {
    pub x: S,
    pub y: S,
    pub theta: S,
    pub u: S,
    pub v: S,
    pub omega: S,
    pub mass: S,
    pub delta_d: S,
}

/// Time derivative of a [`VehicleState`], one slot per field.
pub type StateDerivative<S = f64> = VehicleState<S>;

pub const STATE_FIELDS: [&str; 8] = ["x", "y", "theta", "u", "v", "omega", "mass", "delta_d"];

impl<S: Real> VehicleState<S> {
    pub fn to_array(&self) -> [S; 8] {
        [
            self.x,
            self.y,
            self.theta,
            self.u,
            self.v,
            self.omega,
            self.mass,
            self.delta_d,
        ]
    }

    pub fn from_array(a: [S; 8]) -> Self {
        let [x, y, theta, u, v, omega, mass, delta_d] = a;
        Self {
            x,
            y,
            theta,
            u,
            v,
            omega,
            mass,
            delta_d,
        }
    }

    /// `self + h * k`.
    pub fn add_scaled(&self, h: f64, k: &Self) -> Self {
        Self {
            x: self.x + k.x * h,
            y: self.y + k.y * h,
            theta: self.theta + k.theta * h,
            u: self.u + k.u * h,
            v: self.v + k.v * h,
            omega: self.omega + k.omega * h,
            mass: self.mass + k.mass * h,
            delta_d: self.delta_d + k.delta_d * h,
        }
    }

    pub fn value(&self) -> VehicleState {
        VehicleState::from_array(self.to_array().map(Real::value))
    }

    /// Name of the first non-finite field, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.to_array()
            .iter()
            .position(|s| !s.value().is_finite())
            .map(|i| STATE_FIELDS[i])
    }

    pub fn speed(&self) -> S {
        (self.u * self.u + self.v * self.v).sqrt()
    }
}

impl VehicleState {
    pub fn lift<'t>(&self, tape: &'t crate::autodiff::Tape) -> VehicleState<crate::autodiff::Var<'t>> {
        VehicleState::from_array(self.to_array().map(|x| tape.var(x)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput<S = f64> {
    pub thrust: S,
    /// Commanded gimbal angle.
    pub delta: S,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeroForces<S = f64> {
    pub fx: S,
    pub fy: S,
    pub moment: S,
}

impl<S: Real> AeroForces<S> {
    pub fn zero() -> Self {
        Self {
            fx: S::cst(0.0),
            fy: S::cst(0.0),
            moment: S::cst(0.0),
        }
    }

    pub fn value(&self) -> AeroForces {
        AeroForces {
            fx: self.fx.value(),
            fy: self.fy.value(),
            moment: self.moment.value(),
        }
    }
}

/// Thrust vector and its moment about the cg.
///
/// The thrust line is the body axis rotated by `delta_d`; a positive
/// deflection produces a negative (nose-down for positive theta) moment.
pub fn thrust_force_and_moment<S: Real>(
    thrust: S,
    delta_d: S,
    theta: S,
    scn: &NondimScenario,
) -> ([S; 2], S) {
    let dir = theta + delta_d;
    let force = [thrust * dir.cos(), thrust * dir.sin()];
    let moment = -(thrust * delta_d.sin()) * scn.engine_arm;
    (force, moment)
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Angle of attack in `[0, 2pi)`; zero by convention at zero speed.
pub fn angle_of_attack<S: Real>(state: &VehicleState<S>) -> f64 {
    if state.u.value().hypot(state.v.value()) < MIN_SPEED {
        return 0.0;
    }
    wrap_angle(state.v.value().atan2(state.u.value()) - state.theta.value())
}

/// Angle of attack carried through automatic differentiation: the wrap is a
/// piecewise-constant offset, so the derivative is that of
/// `atan2(v, u) - theta`.
pub fn angle_of_attack_ad<S: Real>(state: &VehicleState<S>) -> S {
    let raw = state.v.atan2(state.u) - state.theta;
    let wrapped = wrap_angle(raw.value());
    raw + (wrapped - raw.value())
}

/// Governing equations with the aerodynamic loads supplied.
pub fn rhs<S: Real>(
    state: &VehicleState<S>,
    ctrl: &ControlInput<S>,
    aero: &AeroForces<S>,
    scn: &NondimScenario,
) -> StateDerivative<S> {
    let (ft, mt) = thrust_force_and_moment(ctrl.thrust, state.delta_d, state.theta, scn);
    let inv_m = S::cst(1.0) / state.mass;
    StateDerivative {
        x: state.u,
        y: state.v,
        theta: state.omega,
        u: (ft[0] + aero.fx * scn.eps_corr) * inv_m,
        v: (ft[1] + aero.fy * scn.eps_corr) * inv_m - scn.gravity,
        omega: (mt + aero.moment * scn.eta_corr) / scn.inertia,
        mass: -ctrl.thrust / scn.exhaust_velocity,
        delta_d: (ctrl.delta - state.delta_d) / scn.lag_time,
    }
}

/// Right-hand side with aerodynamic loads evaluated from the state.
pub fn derivative<S: Real>(
    state: &VehicleState<S>,
    ctrl: &ControlInput<S>,
    model: &AeroModel,
    scn: &NondimScenario,
) -> StateDerivative<S> {
    let aero = model.forces(state, scn);
    rhs(state, ctrl, &aero, scn)
}

/// The four states at which a classical RK4 step evaluates the right-hand
/// side, their derivatives, and the resulting state.
pub struct Rk4Stages<S> {
    pub states: [VehicleState<S>; 4],
    pub slopes: [StateDerivative<S>; 4],
    pub next: VehicleState<S>,
}

/// One RK4 step under zero-order-hold control, aero re-evaluated per stage.
pub fn rk4_stages<S: Real>(
    state: &VehicleState<S>,
    ctrl: &ControlInput<S>,
    model: &AeroModel,
    dt: f64,
    scn: &NondimScenario,
) -> Rk4Stages<S> {
    let x1 = *state;
    let k1 = derivative(&x1, ctrl, model, scn);
    let x2 = state.add_scaled(0.5 * dt, &k1);
    let k2 = derivative(&x2, ctrl, model, scn);
    let x3 = state.add_scaled(0.5 * dt, &k2);
    let k3 = derivative(&x3, ctrl, model, scn);
    let x4 = state.add_scaled(dt, &k3);
    let k4 = derivative(&x4, ctrl, model, scn);
    let a = state.to_array();
    let (s1, s2, s3, s4) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    let next = std::array::from_fn(|i| a[i] + (s1[i] + (s2[i] + s3[i]) * 2.0 + s4[i]) * (dt / 6.0));
    Rk4Stages {
        states: [x1, x2, x3, x4],
        slopes: [k1, k2, k3, k4],
        next: VehicleState::from_array(next),
    }
}

/// Checked RK4 step. Errors report stage 1..=4 (or 5 for the combined
/// update) with step index 0; callers that know the step rewrite it.
pub fn rk4_step(
    state: &VehicleState,
    ctrl: &ControlInput,
    model: &AeroModel,
    dt: f64,
    scn: &NondimScenario,
) -> Result<VehicleState, NumericError> {
    if !(dt > 0.0) {
        return Err(NumericError::Invalid(format!("dt must be positive, got {dt}")));
    }
    let st = rk4_stages(state, ctrl, model, dt, scn);
    for (i, (x, k)) in st.states.iter().zip(&st.slopes).enumerate() {
        if let Some(field) = x.first_non_finite().or_else(|| k.first_non_finite()) {
            return Err(NumericError::NonFiniteState {
                step: 0,
                stage: i + 1,
                field,
            });
        }
    }
    if let Some(field) = st.next.first_non_finite() {
        return Err(NumericError::NonFiniteState {
            step: 0,
            stage: 5,
            field,
        });
    }
    Ok(st.next)
}

impl NumericError {
    pub(crate) fn at_step(self, k: usize) -> Self {
        match self {
            NumericError::NonFiniteState { stage, field, .. } => NumericError::NonFiniteState {
                step: k,
                stage,
                field,
            },
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::scenario::{deg, nondimensionalize, preset};

    fn scn() -> NondimScenario {
        nondimensionalize(&preset("case1").unwrap())
    }

    fn state(u: f64, v: f64, theta: f64) -> VehicleState {
        VehicleState {
            x: 0.0,
            y: 0.0,
            theta,
            u,
            v,
            omega: 0.0,
            mass: 5.0,
            delta_d: 0.0,
        }
    }

    #[test]
    fn undeflected_engine_has_no_moment() {
        let s = scn();
        let (f, m) = thrust_force_and_moment(0.03, 0.0, deg(170.0), &s);
        assert_eq!(m, 0.0);
        let b = [deg(170.0).cos(), deg(170.0).sin()];
        assert!((f[0] * b[1] - f[1] * b[0]).abs() < 1e-18);
    }

    #[test]
    fn full_deflection_moment_magnitude() {
        let s = scn();
        let (_, m) = thrust_force_and_moment(s.thrust_max, deg(10.0), 0.3, &s);
        let dimensional = m * s.refs.moment();
        // T_max sin(10 deg) * 20 m
        let oracle = -2.3e6 * deg(10.0).sin() * 20.0;
        assert!((dimensional - oracle).abs() < 1e-6 * oracle.abs());
        assert!((dimensional.abs() - 7.99e6).abs() < 0.01e6);
    }

    #[test]
    fn belly_flop_angle_of_attack() {
        let a = angle_of_attack(&state(-18.82, -106.73, deg(170.0)));
        assert!((a.to_degrees() - 90.0).abs() < 0.01, "{}", a.to_degrees());
        assert_eq!(angle_of_attack(&state(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(angle_of_attack(&state(0.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn angle_of_attack_ad_slope() {
        let tape = Tape::new();
        let s = state(-0.05, -0.3, deg(170.0)).lift(&tape);
        let a = angle_of_attack_ad(&s);
        assert_eq!(a.value(), angle_of_attack(&s));
        let adj = tape.backward(a);
        let r2 = 0.05f64.powi(2) + 0.09;
        assert!((adj.wrt(s.u) - 0.3 / r2).abs() < 1e-12);
        assert!((adj.wrt(s.v) - (-0.05) / r2).abs() < 1e-12);
        assert_eq!(adj.wrt(s.theta), -1.0);
    }

    #[test]
    fn free_fall_derivative() {
        let s = scn();
        let x = state(0.1, -0.2, 1.0);
        let d = rhs(
            &x,
            &ControlInput { thrust: 0.0, delta: 0.0 },
            &AeroForces::zero(),
            &s,
        );
        assert_eq!(d.u, 0.0);
        assert_eq!(d.v, -s.gravity);
        assert_eq!(d.omega, 0.0);
        assert_eq!(d.mass, 0.0);
        assert_eq!(d.delta_d, 0.0);
        assert_eq!(d.x, 0.1);
    }

    #[test]
    fn mass_flow_at_full_thrust() {
        let s = scn();
        let x = state(0.1, -0.2, 1.0);
        let d = rhs(
            &x,
            &ControlInput { thrust: s.thrust_max, delta: 0.0 },
            &AeroForces::zero(),
            &s,
        );
        let kg_per_s = -d.mass * s.refs.mass / s.refs.time();
        let oracle = 2300e3 / (350.0 * 9.80665);
        assert!((kg_per_s - oracle).abs() < 1e-9 * oracle);
        assert!((kg_per_s - 670.1).abs() < 0.05);
        // 15 t of propellant lasts about 22.4 s at full throttle.
        assert!((15_000.0 / kg_per_s - 22.4).abs() < 0.05);
    }

    #[test]
    fn lag_equilibrium() {
        let s = scn();
        let x = VehicleState {
            delta_d: 0.1,
            ..state(0.1, 0.0, 0.0)
        };
        let d = rhs(
            &x,
            &ControlInput { thrust: 0.02, delta: 0.1 },
            &AeroForces::zero(),
            &s,
        );
        assert_eq!(d.delta_d, 0.0);
    }

    #[test]
    fn rhs_is_deterministic() {
        let s = scn();
        let x = state(-0.05, -0.3, 2.9);
        let c = ControlInput { thrust: 0.03, delta: 0.05 };
        let a = derivative(&x, &c, &AeroModel::simplified(1.0, 0.55), &s);
        let b = derivative(&x, &c, &AeroModel::simplified(1.0, 0.55), &s);
        assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
    }

    #[test]
    fn rk4_rejects_bad_dt_and_reports_stage() {
        let s = scn();
        let c = ControlInput { thrust: 0.02, delta: 0.0 };
        assert!(rk4_step(&state(0.1, 0.0, 0.0), &c, &AeroModel::None, 0.0, &s).is_err());
        let bad = VehicleState {
            mass: 0.0,
            ..state(0.1, 0.0, 0.0)
        };
        match rk4_step(&bad, &c, &AeroModel::None, 0.1, &s) {
            Err(NumericError::NonFiniteState { stage, field, .. }) => {
                assert_eq!(stage, 1);
                assert_eq!(field, "u");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
