//! Adam with a cosine-annealed learning rate, and the outer optimization loop.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aero::AeroModel;
use crate::controls::RawControlParams;
use crate::error::{NumericError, ScenarioError};
use crate::rollout::{evaluate, gradient, GradientEngine, LossBreakdown, Trajectory, DEFAULT_CHECKPOINTS};
use crate::scenario::{invalid, NondimScenario};

/// Infinity-norm bound applied when gradient clipping is enabled.
pub const CLIP_NORM: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "d_beta1")]
    pub beta1: f64,
    #[serde(default = "d_beta2")]
    pub beta2: f64,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_lr_max")]
    pub lr_max: f64,
    #[serde(default = "d_lr_min")]
    pub lr_min: f64,
    #[serde(default = "d_n_steps")]
    pub n_steps: usize,
    #[serde(default = "d_engine")]
    pub grad_engine: GradientEngine,
    #[serde(default = "d_log_every")]
    pub log_every: usize,
    /// Clip gradients to `CLIP_NORM` in the infinity norm.
    #[serde(default)]
    pub clip_grad: bool,
    #[serde(default = "d_checkpoints")]
    pub adjoint_checkpoints: usize,
}

fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_eps() -> f64 {
    1e-8
}
fn d_lr_max() -> f64 {
    1e-3
}
fn d_lr_min() -> f64 {
    1e-5
}
fn d_n_steps() -> usize {
    5000
}
fn d_engine() -> GradientEngine {
    GradientEngine::Bptt
}
fn d_log_every() -> usize {
    100
}
fn d_checkpoints() -> usize {
    DEFAULT_CHECKPOINTS
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            beta1: d_beta1(),
            beta2: d_beta2(),
            eps: d_eps(),
            lr_max: d_lr_max(),
            lr_min: d_lr_min(),
            n_steps: d_n_steps(),
            grad_engine: d_engine(),
            log_every: d_log_every(),
            clip_grad: false,
            adjoint_checkpoints: d_checkpoints(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, b) in [("opt.beta1", self.beta1), ("opt.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid(name, "must lie in [0, 1)"));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(invalid("opt.eps", "must be finite and positive"));
        }
        if !(self.lr_min.is_finite() && self.lr_min > 0.0) {
            return Err(invalid("opt.lr_min", "must be finite and positive"));
        }
        if !(self.lr_max.is_finite() && self.lr_max >= self.lr_min) {
            return Err(invalid("opt.lr_max", "must be finite and at least lr_min"));
        }
        if self.n_steps < 1 {
            return Err(invalid("opt.n_steps", "must be at least 1"));
        }
        if self.grad_engine == GradientEngine::FiniteDiff {
            return Err(invalid("opt.grad_engine", "must be bptt or adjoint"));
        }
        if self.adjoint_checkpoints < 1 {
            return Err(invalid("opt.adjoint_checkpoints", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// `lr_min + (lr_max - lr_min)(1 + cos(pi i / n)) / 2`.
pub fn cosine_lr(i: usize, cfg: &OptimizerConfig) -> f64 {
    let frac = i as f64 / cfg.n_steps as f64;
    cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + (PI * frac).cos())
}

/// One bias-corrected Adam update in place. Parameters are left untouched
/// if any update would be non-finite.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<(), NumericError> {
    let n = params.len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(NumericError::Length { expected: n, got: len });
        }
    }
    let t = state.t + 1;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut next = params.to_vec();
    for i in 0..n {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let step = lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        next[i] -= step;
        if !next[i].is_finite() {
            return Err(NumericError::NonFiniteUpdate { index: i });
        }
    }
    params.copy_from_slice(&next);
    state.m = m;
    state.v = v;
    state.t = t;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub best: RawControlParams,
    pub best_step: usize,
    pub history: Vec<HistoryEntry>,
    pub trajectory: Trajectory,
    pub loss: LossBreakdown,
    pub wall_time_s: f64,
    pub engine: GradientEngine,
    pub gradient_evaluations: usize,
    /// Parameter indices that ended in the flat region of the squashing map.
    pub saturated: Vec<usize>,
}

/// Failed optimization, with the iterate that triggered it.
#[derive(Debug)]
pub struct OptimizationAbort {
    pub error: NumericError,
    pub step: usize,
    pub params: RawControlParams,
    pub adam: AdamState,
    pub history: Vec<HistoryEntry>,
}

/// Runs `n_steps` Adam iterations from the hover initialization and
/// returns the best iterate seen.
pub fn optimize(
    scn: &NondimScenario,
    aero: &AeroModel,
    cfg: &OptimizerConfig,
    mut progress: impl FnMut(&HistoryEntry),
) -> Result<OptimizationResult, Box<OptimizationAbort>> {
    let start = Instant::now();
    let init = RawControlParams::initial(scn);
    let mut params = init.to_flat();
    let mut adam = AdamState::new(params.len());
    let mut history = Vec::with_capacity(cfg.n_steps);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let w = &scn.weights;
    let abort = |error: NumericError, step: usize, p: &[f64], adam: &AdamState, history: &Vec<HistoryEntry>| {
        Box::new(OptimizationAbort {
            error,
            step,
            params: RawControlParams::from_flat(p).expect("even length"),
            adam: adam.clone(),
            history: history.clone(),
        })
    };
    for i in 0..cfg.n_steps {
        let raw = RawControlParams::from_flat(&params).expect("even length");
        let report = gradient(cfg.grad_engine, &raw, scn, aero, w, cfg.adjoint_checkpoints)
            .map_err(|e| abort(e, i, &params, &adam, &history))?;
        if !report.loss.total.is_finite() {
            return Err(abort(NumericError::NonFiniteLoss { step: i }, i, &params, &adam, &history));
        }
        let lr = cosine_lr(i, cfg);
        let entry = HistoryEntry {
            step: i,
            lr,
            loss: report.loss.clone(),
        };
        if entry.loss.total < best.0 {
            best = (entry.loss.total, params.clone(), i);
        }
        if cfg.log_every > 0 && i % cfg.log_every == 0 {
            progress(&entry);
        }
        history.push(entry);
        let mut g = report.flat();
        if cfg.clip_grad {
            g.iter_mut().for_each(|x| *x = x.clamp(-CLIP_NORM, CLIP_NORM));
        }
        adam_step(&mut params, &g, &mut adam, lr, cfg.beta1, cfg.beta2, cfg.eps)
            .map_err(|e| abort(e, i, &params, &adam, &history))?;
    }
    let best_raw = RawControlParams::from_flat(&best.1).expect("even length");
    let (trajectory, loss) = evaluate(&best_raw, scn, aero, w).map_err(|e| abort(e, cfg.n_steps, &best.1, &adam, &history))?;
    Ok(OptimizationResult {
        saturated: best_raw.saturated(),
        best: best_raw,
        best_step: best.2,
        history,
        trajectory,
        loss,
        wall_time_s: start.elapsed().as_secs_f64(),
        engine: cfg.grad_engine,
        gradient_evaluations: cfg.n_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{nondimensionalize, preset};

    #[test]
    fn schedule_endpoints() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cosine_lr(0, &cfg), 1e-3);
        assert!((cosine_lr(cfg.n_steps, &cfg) - 1e-5).abs() < 1e-20);
        assert!((cosine_lr(cfg.n_steps / 2, &cfg) - 5.05e-4).abs() < 1e-15);
        for i in 0..cfg.n_steps {
            assert!(cosine_lr(i + 1, &cfg) <= cosine_lr(i, &cfg));
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        st.m = vec![0.5, 0.5];
        st.v = vec![0.25, 0.25];
        adam_step(&mut p, &[0.0, 0.0], &mut st, 0.1, 0.9, 0.999, 1e-8).unwrap();
        assert!(p[0] < 1.0);
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, 0.1, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [3.0, -0.02, 1e3] {
            let mut p = vec![0.0];
            let mut st = AdamState::new(1);
            adam_step(&mut p, &[g], &mut st, 0.01, 0.9, 0.999, 1e-8).unwrap();
            let oracle = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[0] - oracle).abs() < 1e-15, "{} vs {oracle}", p[0]);
        }
    }

    #[test]
    fn non_finite_update_names_index() {
        let mut p = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        let err = adam_step(&mut p, &[1.0, f64::NAN], &mut st, 0.01, 0.9, 0.999, 1e-8).unwrap_err();
        assert_eq!(err, NumericError::NonFiniteUpdate { index: 1 });
        assert_eq!(p, vec![0.0, 0.0]);
        assert_eq!(st.t, 0);
    }

    #[test]
    fn config_rules() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            lr_min: 1e-2,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            beta2: 1.0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_step_run() {
        let mut s = nondimensionalize(&preset("case1").unwrap());
        s.steps = 8;
        let cfg = OptimizerConfig {
            n_steps: 1,
            ..OptimizerConfig::default()
        };
        let r = optimize(&s, &AeroModel::simplified(1.0, 0.55), &cfg, |_| {}).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.gradient_evaluations, 1);
        assert_eq!(r.best, RawControlParams::initial(&s));
    }
}
