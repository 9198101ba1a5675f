//! Raw optimization parameters and the squashing map onto feasible
//! thrust and gimbal commands.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::dynamics::ControlInput;
use crate::error::NumericError;
use crate::scenario::NondimScenario;

/// Raw parameters beyond this magnitude sit where the squashing
/// functions are flat.
pub const SATURATION_LIMIT: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawControlParams {
    pub u_thrust: Vec<f64>,
    pub u_delta: Vec<f64>,
}

impl RawControlParams {
    pub fn zeros(steps: usize) -> Self {
        Self {
            u_thrust: vec![0.0; steps],
            u_delta: vec![0.0; steps],
        }
    }

    /// Thrust parameter at the hover throttle, zero gimbal.
    pub fn initial(scn: &NondimScenario) -> Self {
        let frac = (scn.hover_thrust() - scn.thrust_min) / (scn.thrust_max - scn.thrust_min);
        let frac = frac.clamp(1e-3, 1.0 - 1e-3);
        let u = (frac / (1.0 - frac)).ln();
        Self {
            u_thrust: vec![u; scn.steps],
            u_delta: vec![0.0; scn.steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.u_thrust.len()
    }

    /// `[u_thrust..., u_delta...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.u_thrust.clone();
        v.extend_from_slice(&self.u_delta);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self, NumericError> {
        if flat.len() % 2 != 0 {
            return Err(NumericError::Invalid(format!(
                "flat control vector has odd length {}",
                flat.len()
            )));
        }
        let k = flat.len() / 2;
        Ok(Self {
            u_thrust: flat[..k].to_vec(),
            u_delta: flat[k..].to_vec(),
        })
    }

    pub fn check(&self, steps: usize) -> Result<(), NumericError> {
        for len in [self.u_thrust.len(), self.u_delta.len()] {
            if len != steps {
                return Err(NumericError::Length {
                    expected: steps,
                    got: len,
                });
            }
        }
        if let Some(index) = self.u_thrust.iter().position(|x| !x.is_finite()) {
            return Err(NumericError::NonFiniteControl {
                which: "u_T",
                index,
            });
        }
        if let Some(index) = self.u_delta.iter().position(|x| !x.is_finite()) {
            return Err(NumericError::NonFiniteControl {
                which: "u_delta",
                index,
            });
        }
        Ok(())
    }

    /// Indices whose raw value is in the flat region of the squashing map.
    pub fn saturated(&self) -> Vec<usize> {
        let k = self.steps();
        self.u_thrust
            .iter()
            .chain(&self.u_delta)
            .enumerate()
            .filter(|(_, u)| u.abs() > SATURATION_LIMIT)
            .map(|(i, _)| i % k.max(1))
            .collect()
    }
}

/// Per-step thrust and commanded gimbal, nondimensional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence<S = f64> {
    pub thrust: Vec<S>,
    pub delta: Vec<S>,
}

impl<S: Real> ControlSequence<S> {
    pub fn len(&self) -> usize {
        self.thrust.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thrust.is_empty()
    }

    pub fn at(&self, k: usize) -> ControlInput<S> {
        ControlInput {
            thrust: self.thrust[k],
            delta: self.delta[k],
        }
    }
}

/// Squashing map for a single step.
pub fn squash<S: Real>(u_thrust: S, u_delta: S, scn: &NondimScenario) -> ControlInput<S> {
    ControlInput {
        thrust: u_thrust.sigmoid() * (scn.thrust_max - scn.thrust_min) + scn.thrust_min,
        delta: u_delta.tanh() * scn.delta_max,
    }
}

/// `T = T_min + (T_max - T_min) sigma(u_T)`, `delta = delta_max tanh(u_delta)`.
pub fn reparameterize(raw: &RawControlParams, scn: &NondimScenario) -> Result<ControlSequence, NumericError> {
    raw.check(raw.steps())?;
    Ok(reparameterize_generic(&raw.u_thrust, &raw.u_delta, scn))
}

pub fn reparameterize_generic<S: Real>(u_thrust: &[S], u_delta: &[S], scn: &NondimScenario) -> ControlSequence<S> {
    let (thrust, delta) = u_thrust
        .iter()
        .zip(u_delta)
        .map(|(&a, &b)| {
            let c = squash(a, b, scn);
            (clamp_thrust(c.thrust, scn), clamp_delta(c.delta, scn))
        })
        .unzip();
    ControlSequence { thrust, delta }
}

// Rounding in `T_min + span * sigma` can land one ulp outside the range at
// the extremes; pin the value without touching the derivative.
fn clamp_thrust<S: Real>(t: S, scn: &NondimScenario) -> S {
    let v = t.value();
    if v > scn.thrust_max {
        t + (scn.thrust_max - v)
    } else if v < scn.thrust_min {
        t + (scn.thrust_min - v)
    } else {
        t
    }
}

fn clamp_delta<S: Real>(d: S, scn: &NondimScenario) -> S {
    let v = d.value();
    if v.abs() > scn.delta_max {
        d + (scn.delta_max.copysign(v) - v)
    } else {
        d
    }
}

/// Sum of squared step-to-step changes, normalized by `T_max` and `delta_max`.
pub fn smoothness_penalty<S: Real>(seq: &ControlSequence<S>, scn: &NondimScenario) -> S {
    let mut acc = S::cst(0.0);
    let (ti, di) = (1.0 / (scn.thrust_max * scn.thrust_max), 1.0 / (scn.delta_max * scn.delta_max));
    for k in 1..seq.len() {
        let dt = seq.thrust[k] - seq.thrust[k - 1];
        let dd = seq.delta[k] - seq.delta[k - 1];
        acc = acc + dt * dt * ti + dd * dd * di;
    }
    acc
}

/// Derivatives of `(T_k, delta_k)` with respect to `(u_T[k], u_delta[k])`.
pub fn squash_slopes(u_thrust: f64, u_delta: f64, scn: &NondimScenario) -> (f64, f64) {
    let s = u_thrust.sigmoid();
    let t = u_delta.tanh();
    ((scn.thrust_max - scn.thrust_min) * s * (1.0 - s), scn.delta_max * (1.0 - t * t))
}
