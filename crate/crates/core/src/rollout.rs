//! Forward rollout, composite loss, and gradients of the loss with respect
//! to the raw control parameters.
//!
//! Three gradient engines share one loss definition:
//!
//! * [`grad_bptt`] records the whole rollout on a reverse-mode tape and
//!   sweeps it once. Memory grows linearly with `K`.
//! * [`grad_adjoint`] integrates the adjoint equation
//!   `d lambda / dt = -(df/dx)^T lambda` backward with classical RK4, using
//!   the forward RK4 stage states as the Jacobian evaluation points (the
//!   step-end stage first). With that pairing the backward sweep is the
//!   exact adjoint of the forward scheme, so it agrees with BPTT to
//!   rounding. Forward states are recovered from a fixed number of
//!   checkpoints, keeping memory independent of `K`.
//! * [`finite_diff_grad`] is the central-difference oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aero::AeroModel;
use crate::autodiff::{Real, Tape, Var, NODE_BYTES};
use crate::controls::{reparameterize, reparameterize_generic, smoothness_penalty, squash_slopes, ControlSequence, RawControlParams};
use crate::dynamics::{angle_of_attack, derivative, rk4_stages, rk4_step, AeroForces, ControlInput, VehicleState};
use crate::error::{NumericError, ScenarioError};
use crate::scenario::{invalid, NondimScenario};

/// Central-difference step on raw parameters.
pub const FD_STEP: f64 = 1e-6;
/// Number of stored forward states used by the adjoint engine.
pub const DEFAULT_CHECKPOINTS: usize = 16;

const STATE_BYTES: usize = std::mem::size_of::<VehicleState>();

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `K + 1` states, `states[0]` is the initial condition.
    pub states: Vec<VehicleState>,
    pub controls: ControlSequence,
    /// Aerodynamic loads at the start of each step.
    pub aero_log: Vec<AeroForces>,
    /// Angle of attack at the start of each step, in `[0, 2pi)`.
    pub alpha_log: Vec<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn terminal(&self) -> &VehicleState {
        self.states.last().expect("trajectory has an initial state")
    }

    pub fn min_mass(&self) -> f64 {
        self.states.iter().map(|s| s.mass).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    #[serde(default = "one")]
    pub w_r: f64,
    #[serde(default = "one")]
    pub w_v: f64,
    #[serde(default = "one")]
    pub w_theta: f64,
    #[serde(default = "one")]
    pub w_omega: f64,
    #[serde(default = "default_smooth")]
    pub w_smooth: f64,
    #[serde(default = "default_mass")]
    pub w_mass: f64,
    #[serde(default = "default_flip")]
    pub w_flip: f64,
}

fn one() -> f64 {
    1.0
}
fn default_smooth() -> f64 {
    0.01
}
fn default_mass() -> f64 {
    10.0
}
fn default_flip() -> f64 {
    0.1
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_r: 1.0,
            w_v: 1.0,
            w_theta: 1.0,
            w_omega: 1.0,
            w_smooth: default_smooth(),
            w_mass: default_mass(),
            w_flip: default_flip(),
        }
    }
}

impl LossWeights {
    /// Every weight zero.
    pub fn zero() -> Self {
        Self {
            w_r: 0.0,
            w_v: 0.0,
            w_theta: 0.0,
            w_omega: 0.0,
            w_smooth: 0.0,
            w_mass: 0.0,
            w_flip: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let all = [
            ("loss_weights.w_r", self.w_r),
            ("loss_weights.w_v", self.w_v),
            ("loss_weights.w_theta", self.w_theta),
            ("loss_weights.w_omega", self.w_omega),
            ("loss_weights.w_smooth", self.w_smooth),
            ("loss_weights.w_mass", self.w_mass),
            ("loss_weights.w_flip", self.w_flip),
        ];
        for (name, w) in all {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

pub const LOSS_TERMS: [&str; 7] = [
    "terminal_position",
    "terminal_velocity",
    "terminal_pitch",
    "terminal_omega",
    "smoothness",
    "mass_floor",
    "flip_deadline",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub terminal_position: f64,
    pub terminal_velocity: f64,
    pub terminal_pitch: f64,
    pub terminal_omega: f64,
    pub smoothness: f64,
    pub mass_floor: f64,
    pub flip_deadline: f64,
}

impl LossBreakdown {
    fn from_terms(t: [f64; 7]) -> Self {
        Self {
            total: sum_terms(t),
            terminal_position: t[0],
            terminal_velocity: t[1],
            terminal_pitch: t[2],
            terminal_omega: t[3],
            smoothness: t[4],
            mass_floor: t[5],
            flip_deadline: t[6],
        }
    }

    /// Weighted terms in [`LOSS_TERMS`] order.
    pub fn terms(&self) -> [f64; 7] {
        [
            self.terminal_position,
            self.terminal_velocity,
            self.terminal_pitch,
            self.terminal_omega,
            self.smoothness,
            self.mass_floor,
            self.flip_deadline,
        ]
    }
}

fn sum_terms<S: Real>(t: [S; 7]) -> S {
    t[0] + t[1] + t[2] + t[3] + t[4] + t[5] + t[6]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientEngine {
    Bptt,
    Adjoint,
    FiniteDiff,
}

impl GradientEngine {
    pub fn as_str(&self) -> &'static str {
        match self {
            GradientEngine::Bptt => "bptt",
            GradientEngine::Adjoint => "adjoint",
            GradientEngine::FiniteDiff => "finite_diff",
        }
    }
}

impl std::fmt::Display for GradientEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GradientEngine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bptt" => Ok(GradientEngine::Bptt),
            "adjoint" => Ok(GradientEngine::Adjoint),
            "finite_diff" => Ok(GradientEngine::FiniteDiff),
            other => Err(format!("unknown engine `{other}` (expected bptt, adjoint or finite_diff)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub engine: GradientEngine,
    pub grad_u_thrust: Vec<f64>,
    pub grad_u_delta: Vec<f64>,
    /// Loss at the evaluation point.
    pub loss: LossBreakdown,
    pub wall_time_s: f64,
    /// Peak bytes of intermediate state held by the engine, excluding the
    /// inputs and the returned gradient.
    pub peak_aux_bytes: usize,
    /// Full forward rollouts performed (finite differences only).
    pub rollouts: usize,
}

impl GradientReport {
    /// `[grad_u_thrust..., grad_u_delta...]`.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.grad_u_thrust.clone();
        v.extend_from_slice(&self.grad_u_delta);
        v
    }

    fn check_finite(&self) -> Result<(), NumericError> {
        for (which, g) in [("u_T", &self.grad_u_thrust), ("u_delta", &self.grad_u_delta)] {
            if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                return Err(NumericError::NonFiniteGradient { which, index });
            }
        }
        Ok(())
    }
}

fn lift_state<S: Real>(x: &VehicleState) -> VehicleState<S> {
    VehicleState::from_array(x.to_array().map(S::cst))
}

/// Weighted terminal residuals: position, velocity, pitch, pitch rate.
fn terminal_terms<S: Real>(x: &VehicleState<S>, scn: &NondimScenario, w: &LossWeights) -> [S; 4] {
    let dx = x.x - scn.r_f[0];
    let dy = x.y - scn.r_f[1];
    let du = x.u - scn.v_f[0];
    let dv = x.v - scn.v_f[1];
    [
        (dx * dx + dy * dy) * w.w_r,
        (du * du + dv * dv) * w.w_v,
        (x.theta - scn.theta_f).square() * w.w_theta,
        (x.omega - scn.omega_f).square() * w.w_omega,
    ]
}

/// Weighted per-node path terms: dry-mass floor and flip deadline.
fn node_terms<S: Real>(x: &VehicleState<S>, k: usize, scn: &NondimScenario, w: &LossWeights) -> [S; 2] {
    let mass = (-x.mass + scn.m_dry).relu_sq() * w.w_mass;
    let flip = if scn.time_at(k) > scn.t_flip_max {
        (x.theta - scn.theta_f).square() * w.w_flip
    } else {
        S::cst(0.0)
    };
    [mass, flip]
}

fn loss_terms<S: Real>(
    states: &[VehicleState<S>],
    seq: &ControlSequence<S>,
    scn: &NondimScenario,
    w: &LossWeights,
) -> [S; 7] {
    let last = states.last().expect("at least the initial state");
    let [tp, tv, tt, to] = terminal_terms(last, scn, w);
    let smooth = smoothness_penalty(seq, scn) * w.w_smooth;
    let mut mass = S::cst(0.0);
    let mut flip = S::cst(0.0);
    for (k, x) in states.iter().enumerate() {
        let [m, f] = node_terms(x, k, scn, w);
        mass = mass + m;
        flip = flip + f;
    }
    [tp, tv, tt, to, smooth, mass, flip]
}

/// Simulates `K` RK4 steps from the scenario's initial state.
pub fn rollout(raw: &RawControlParams, scn: &NondimScenario, aero: &AeroModel) -> Result<Trajectory, NumericError> {
    raw.check(scn.steps)?;
    let controls = reparameterize(raw, scn)?;
    simulate(&controls, scn, aero)
}

/// Rollout with explicit (already feasible) controls.
pub fn simulate(controls: &ControlSequence, scn: &NondimScenario, aero: &AeroModel) -> Result<Trajectory, NumericError> {
    let k_total = controls.len();
    if k_total != scn.steps || controls.delta.len() != scn.steps {
        return Err(NumericError::Length {
            expected: scn.steps,
            got: k_total.min(controls.delta.len()),
        });
    }
    let mut states = Vec::with_capacity(k_total + 1);
    let mut aero_log = Vec::with_capacity(k_total);
    let mut alpha_log = Vec::with_capacity(k_total);
    let mut x = scn.initial;
    states.push(x);
    for k in 0..k_total {
        aero_log.push(aero.forces(&x, scn));
        alpha_log.push(angle_of_attack(&x));
        x = rk4_step(&x, &controls.at(k), aero, scn.dt, scn).map_err(|e| e.at_step(k))?;
        states.push(x);
    }
    Ok(Trajectory {
        states,
        controls: controls.clone(),
        aero_log,
        alpha_log,
        dt: scn.dt,
    })
}

pub fn loss(traj: &Trajectory, scn: &NondimScenario, w: &LossWeights) -> LossBreakdown {
    LossBreakdown::from_terms(loss_terms(&traj.states, &traj.controls, scn, w))
}

/// Loss of a raw parameter vector (rollout plus loss).
pub fn evaluate(
    raw: &RawControlParams,
    scn: &NondimScenario,
    aero: &AeroModel,
    w: &LossWeights,
) -> Result<(Trajectory, LossBreakdown), NumericError> {
    let traj = rollout(raw, scn, aero)?;
    let l = loss(&traj, scn, w);
    Ok((traj, l))
}

/// Reverse accumulation through the full recorded rollout.
pub fn grad_bptt(
    raw: &RawControlParams,
    scn: &NondimScenario,
    aero: &AeroModel,
    w: &LossWeights,
) -> Result<GradientReport, NumericError> {
    let start = Instant::now();
    raw.check(scn.steps)?;
    let k_total = scn.steps;
    let tape = Tape::with_capacity(k_total * 2048);
    let ut: Vec<Var> = raw.u_thrust.iter().map(|&u| tape.var(u)).collect();
    let ud: Vec<Var> = raw.u_delta.iter().map(|&u| tape.var(u)).collect();
    let seq = reparameterize_generic(&ut, &ud, scn);
    let mut states: Vec<VehicleState<Var>> = Vec::with_capacity(k_total + 1);
    states.push(lift_state(&scn.initial));
    for k in 0..k_total {
        let st = rk4_stages(&states[k], &seq.at(k), aero, scn.dt, scn);
        check_stages(&st.states, &st.slopes, &st.next, k)?;
        states.push(st.next);
    }
    let terms = loss_terms(&states, &seq, scn, w);
    let total = sum_terms(terms);
    let adj = tape.backward(total);
    let peak_aux_bytes = tape.len() * (NODE_BYTES + std::mem::size_of::<f64>());
    let report = GradientReport {
        engine: GradientEngine::Bptt,
        grad_u_thrust: ut.iter().map(|&v| adj.wrt(v)).collect(),
        grad_u_delta: ud.iter().map(|&v| adj.wrt(v)).collect(),
        loss: LossBreakdown::from_terms(terms.map(Real::value)),
        wall_time_s: start.elapsed().as_secs_f64(),
        peak_aux_bytes,
        rollouts: 0,
    };
    report.check_finite()?;
    Ok(report)
}

fn check_stages<S: Real>(
    xs: &[VehicleState<S>; 4],
    ks: &[VehicleState<S>; 4],
    next: &VehicleState<S>,
    step: usize,
) -> Result<(), NumericError> {
    for (i, (x, k)) in xs.iter().zip(ks).enumerate() {
        if let Some(field) = x.first_non_finite().or_else(|| k.first_non_finite()) {
            return Err(NumericError::NonFiniteState {
                step,
                stage: i + 1,
                field,
            });
        }
    }
    if let Some(field) = next.first_non_finite() {
        return Err(NumericError::NonFiniteState { step, stage: 5, field });
    }
    Ok(())
}

/// Tracks the bytes held by the adjoint engine.
#[derive(Default)]
struct Meter {
    current: usize,
    peak: usize,
}

impl Meter {
    fn hold(&mut self, bytes: usize) {
        self.current += bytes;
        self.peak = self.peak.max(self.current);
    }

    fn release(&mut self, bytes: usize) {
        self.current -= bytes;
    }
}

/// Vector-Jacobian product of the right-hand side at one stage state:
/// returns `(df/dx)^T l` and `(df/dc)^T l` for `c = (T, delta)`.
fn rhs_vjp(
    tape: &mut Tape,
    x: &VehicleState,
    c: &ControlInput,
    l: &[f64; 8],
    aero: &AeroModel,
    scn: &NondimScenario,
    meter: &mut Meter,
) -> ([f64; 8], [f64; 2]) {
    tape.clear();
    let out = {
        let xv = x.lift(tape);
        let cv = ControlInput {
            thrust: tape.var(c.thrust),
            delta: tape.var(c.delta),
        };
        let f = derivative(&xv, &cv, aero, scn).to_array();
        let seeds: Vec<(Var, f64)> = f.iter().copied().zip(l.iter().copied()).collect();
        let adj = tape.backward_seeded(&seeds);
        let bytes = tape.len() * (NODE_BYTES + std::mem::size_of::<f64>());
        meter.hold(bytes);
        meter.release(bytes);
        (
            xv.to_array().map(|v| adj.wrt(v)),
            [adj.wrt(cv.thrust), adj.wrt(cv.delta)],
        )
    };
    out
}

/// Gradient of the path terms at node `k` with respect to the state.
fn node_grad(x: &VehicleState, k: usize, scn: &NondimScenario, w: &LossWeights, terminal: bool) -> [f64; 8] {
    let tape = Tape::new();
    let xv = x.lift(&tape);
    let [m, f] = node_terms(&xv, k, scn, w);
    let mut total = m + f;
    if terminal {
        let t = terminal_terms(&xv, scn, w);
        total = total + t[0] + t[1] + t[2] + t[3];
    }
    let adj = tape.backward(total);
    xv.to_array().map(|v| adj.wrt(v))
}

fn axpy(y: &[f64; 8], h: f64, k: &[f64; 8]) -> [f64; 8] {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Backward RK4 on the adjoint equation with checkpointed forward states.
pub fn grad_adjoint(
    raw: &RawControlParams,
    scn: &NondimScenario,
    aero: &AeroModel,
    w: &LossWeights,
) -> Result<GradientReport, NumericError> {
    grad_adjoint_with(raw, scn, aero, w, DEFAULT_CHECKPOINTS)
}

/// [`grad_adjoint`] with an explicit checkpoint budget.
pub fn grad_adjoint_with(
    raw: &RawControlParams,
    scn: &NondimScenario,
    aero: &AeroModel,
    w: &LossWeights,
    checkpoints: usize,
) -> Result<GradientReport, NumericError> {
    let start = Instant::now();
    raw.check(scn.steps)?;
    if checkpoints == 0 {
        return Err(NumericError::Invalid("adjoint needs at least one checkpoint".into()));
    }
    let k_total = scn.steps;
    let seq = reparameterize(raw, scn)?;
    let interval = k_total.div_ceil(checkpoints).max(1);
    let mut meter = Meter::default();

    // Forward sweep: loss terms and checkpoints only.
    let n_ckpt = k_total.div_ceil(interval).max(1);
    let mut ckpt: Vec<VehicleState> = Vec::with_capacity(n_ckpt);
    meter.hold(n_ckpt * STATE_BYTES);
    let mut x = scn.initial;
    let mut mass = 0.0;
    let mut flip = 0.0;
    for k in 0..k_total {
        if k % interval == 0 {
            ckpt.push(x);
        }
        let [m, f] = node_terms(&x, k, scn, w);
        mass += m;
        flip += f;
        x = rk4_step(&x, &seq.at(k), aero, scn.dt, scn).map_err(|e| e.at_step(k))?;
    }
    let [m, f] = node_terms(&x, k_total, scn, w);
    mass += m;
    flip += f;
    let [tp, tv, tt, to] = terminal_terms(&x, scn, w);
    let smooth = smoothness_penalty(&seq, scn) * w.w_smooth;
    let loss = LossBreakdown::from_terms([tp, tv, tt, to, smooth, mass, flip]);

    // Backward sweep. Working set: one recomputed state, the four stage
    // states, five adjoint vectors, and the per-stage local tape.
    meter.hold(STATE_BYTES * 5 + std::mem::size_of::<[f64; 8]>() * 5);
    let h = scn.dt;
    let mut lambda = node_grad(&x, k_total, scn, w, true);
    let mut g_thrust = vec![0.0; k_total];
    let mut g_delta = vec![0.0; k_total];
    let mut tape = Tape::with_capacity(4096);
    for k in (0..k_total).rev() {
        let c = k / interval;
        let mut xk = ckpt[c];
        for j in c * interval..k {
            xk = rk4_step(&xk, &seq.at(j), aero, h, scn).map_err(|e| e.at_step(j))?;
        }
        let ctrl = seq.at(k);
        let st = rk4_stages(&xk, &ctrl, aero, h, scn);
        let l1 = lambda;
        let (k1, c1) = rhs_vjp(&mut tape, &st.states[3], &ctrl, &l1, aero, scn, &mut meter);
        let l2 = axpy(&lambda, 0.5 * h, &k1);
        let (k2, c2) = rhs_vjp(&mut tape, &st.states[2], &ctrl, &l2, aero, scn, &mut meter);
        let l3 = axpy(&lambda, 0.5 * h, &k2);
        let (k3, c3) = rhs_vjp(&mut tape, &st.states[1], &ctrl, &l3, aero, scn, &mut meter);
        let l4 = axpy(&lambda, h, &k3);
        let (k4, c4) = rhs_vjp(&mut tape, &st.states[0], &ctrl, &l4, aero, scn, &mut meter);
        lambda = std::array::from_fn(|i| lambda[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        g_thrust[k] = h / 6.0 * (c1[0] + 2.0 * c2[0] + 2.0 * c3[0] + c4[0]);
        g_delta[k] = h / 6.0 * (c1[1] + 2.0 * c2[1] + 2.0 * c3[1] + c4[1]);
        if k > 0 {
            let jump = node_grad(&xk, k, scn, w, false);
            lambda = axpy(&lambda, 1.0, &jump);
        }
    }

    // Smoothness term and the squashing map.
    let tn = w.w_smooth / (scn.thrust_max * scn.thrust_max);
    let dn = w.w_smooth / (scn.delta_max * scn.delta_max);
    for k in 0..k_total {
        let mut gt = 0.0;
        let mut gd = 0.0;
        if k > 0 {
            gt += 2.0 * (seq.thrust[k] - seq.thrust[k - 1]) * tn;
            gd += 2.0 * (seq.delta[k] - seq.delta[k - 1]) * dn;
        }
        if k + 1 < k_total {
            gt -= 2.0 * (seq.thrust[k + 1] - seq.thrust[k]) * tn;
            gd -= 2.0 * (seq.delta[k + 1] - seq.delta[k]) * dn;
        }
        let (st, sd) = squash_slopes(raw.u_thrust[k], raw.u_delta[k], scn);
        g_thrust[k] = (g_thrust[k] + gt) * st;
        g_delta[k] = (g_delta[k] + gd) * sd;
    }

    let report = GradientReport {
        engine: GradientEngine::Adjoint,
        grad_u_thrust: g_thrust,
        grad_u_delta: g_delta,
        loss,
        wall_time_s: start.elapsed().as_secs_f64(),
        peak_aux_bytes: meter.peak,
        rollouts: 0,
    };
    report.check_finite()?;
    Ok(report)
}

/// Central differences, one pair of rollouts per raw parameter.
pub fn finite_diff_grad(
    raw: &RawControlParams,
    scn: &NondimScenario,
    aero: &AeroModel,
    w: &LossWeights,
    h: f64,
) -> Result<GradientReport, NumericError> {
    let start = Instant::now();
    if !(h > 0.0) {
        return Err(NumericError::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let (_, base) = evaluate(raw, scn, aero, w)?;
    let mut flat = raw.to_flat();
    let mut grad = vec![0.0; flat.len()];
    let mut rollouts = 0;
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + h;
        let lp = evaluate(&RawControlParams::from_flat(&flat)?, scn, aero, w)?.1.total;
        flat[i] = orig - h;
        let lm = evaluate(&RawControlParams::from_flat(&flat)?, scn, aero, w)?.1.total;
        flat[i] = orig;
        rollouts += 2;
        grad[i] = (lp - lm) / (2.0 * h);
    }
    let k = raw.steps();
    Ok(GradientReport {
        engine: GradientEngine::FiniteDiff,
        grad_u_thrust: grad[..k].to_vec(),
        grad_u_delta: grad[k..].to_vec(),
        loss: base,
        wall_time_s: start.elapsed().as_secs_f64(),
        peak_aux_bytes: 0,
        rollouts,
    })
}

/// Dispatches to the requested engine.
pub fn gradient(
    engine: GradientEngine,
    raw: &RawControlParams,
    scn: &NondimScenario,
    aero: &AeroModel,
    w: &LossWeights,
    checkpoints: usize,
) -> Result<GradientReport, NumericError> {
    match engine {
        GradientEngine::Bptt => grad_bptt(raw, scn, aero, w),
        GradientEngine::Adjoint => grad_adjoint_with(raw, scn, aero, w, checkpoints),
        GradientEngine::FiniteDiff => finite_diff_grad(raw, scn, aero, w, FD_STEP),
    }
}

/// Outcome of comparing a gradient with a finite-difference reference.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub passed: bool,
    pub first_failure: Option<usize>,
    /// Component with the largest relative error among significant entries.
    pub worst_index: usize,
    pub worst_rel: f64,
    /// Largest absolute error among entries with `|reference| <= GRAD_CHECK_FLOOR`.
    pub worst_abs: f64,
}

pub const GRAD_CHECK_REL: f64 = 1e-5;
pub const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Relative error below 1e-5 where `|reference| > 1e-8`, absolute error
/// below 1e-8 elsewhere.
pub fn check_against_reference(g: &[f64], reference: &[f64]) -> GradCheck {
    assert_eq!(g.len(), reference.len());
    let mut out = GradCheck {
        passed: true,
        first_failure: None,
        worst_index: 0,
        worst_rel: 0.0,
        worst_abs: 0.0,
    };
    for (i, (&a, &r)) in g.iter().zip(reference).enumerate() {
        let err = (a - r).abs();
        let ok = if r.abs() > GRAD_CHECK_FLOOR {
            let rel = err / r.abs();
            if rel > out.worst_rel || rel.is_nan() {
                out.worst_rel = rel;
                out.worst_index = i;
            }
            rel < GRAD_CHECK_REL
        } else {
            out.worst_abs = out.worst_abs.max(err);
            err < GRAD_CHECK_FLOOR
        };
        if !ok && out.passed {
            out.passed = false;
            out.first_failure = Some(i);
        }
    }
    out
}

/// Mean absolute difference relative to the mean magnitude of `reference`.
pub fn relative_mae(a: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(a.len(), reference.len());
    let n = a.len().max(1) as f64;
    let mae = a.iter().zip(reference).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    let scale = reference.iter().map(|y| y.abs()).sum::<f64>() / n;
    if scale == 0.0 {
        if mae == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        mae / scale
    }
}
