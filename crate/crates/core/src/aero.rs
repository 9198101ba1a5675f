//! Aerodynamic loads: the fixed-coefficient drag model, an analytic
//! high-angle-of-attack coefficient table, and an MLP surrogate trained on it.
//!
//! Sign conventions. Moments are positive counter-clockwise (increasing
//! theta). Positive `C_L` acts along the velocity rotated by +90 degrees.
//! The stand-in table puts the centre of pressure forward of the cg, the
//! same geometry the drag-only model uses, so `C_M = (l_cp - l_cg) C_N / L_ref`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::dynamics::{angle_of_attack_ad, wrap_angle, AeroForces, VehicleState, MIN_SPEED};
use crate::error::{Error, NumericError, Result};
use crate::optimizer::{adam_step, AdamState};
use crate::scenario::{AeroSpec, NondimScenario};

/// Centre-of-pressure fraction used by the stand-in table.
pub const STANDIN_CP_FRAC: f64 = 0.55;
/// Centre-of-gravity fraction used by the stand-in table.
pub const STANDIN_CG_FRAC: f64 = 0.60;

/// Drag-only model with a fixed centre of pressure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedAero {
    pub drag_coeff: f64,
    /// Centre of pressure from the nose, as a fraction of `L_ref`.
    pub l_cp_frac: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateMeta {
    pub training_loss: f64,
    pub samples: usize,
    pub seed: u64,
    pub epochs: usize,
}

/// `(sin a, cos a) -> [C_L, C_D, C_M]`, tanh hidden layers, linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSurrogate {
    pub layers: Vec<Layer>,
    pub activation: String,
    #[serde(default)]
    pub meta: SurrogateMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSample {
    pub alpha: f64,
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AeroModel {
    Simplified(SimplifiedAero),
    Surrogate(MlpSurrogate),
    None,
}

impl AeroModel {
    pub fn simplified(drag_coeff: f64, l_cp_frac: f64) -> Self {
        AeroModel::Simplified(SimplifiedAero {
            drag_coeff,
            l_cp_frac,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AeroModel::Simplified(_) => "simplified",
            AeroModel::Surrogate(_) => "surrogate",
            AeroModel::None => "none",
        }
    }

    pub fn forces<S: Real>(&self, state: &VehicleState<S>, scn: &NondimScenario) -> AeroForces<S> {
        match self {
            AeroModel::Simplified(m) => simplified_forces(state, m, scn),
            AeroModel::Surrogate(m) => surrogate_forces(state, m, scn),
            AeroModel::None => AeroForces::zero(),
        }
    }

    /// Builds the model a scenario asks for. Surrogates without a weights
    /// file are trained on the stand-in table with the scenario seed.
    pub fn from_spec(spec: &AeroSpec, seed: u64) -> Result<Self> {
        match spec {
            AeroSpec::Simplified {
                drag_coeff,
                l_cp_frac,
            } => Ok(AeroModel::simplified(*drag_coeff, *l_cp_frac)),
            AeroSpec::Surrogate {
                weights_path: Some(p),
                ..
            } => Ok(AeroModel::Surrogate(MlpSurrogate::load(Path::new(p))?)),
            AeroSpec::Surrogate {
                weights_path: None,
                samples,
            } => {
                let data = generate_dataset(*samples)?;
                let model = train_surrogate(&data, &TrainerConfig::default(), seed)?;
                Ok(AeroModel::Surrogate(model))
            }
            AeroSpec::None => Ok(AeroModel::None),
        }
    }
}

fn cross2<S: Real>(a: [S; 2], b: [S; 2]) -> S {
    a[0] * b[1] - a[1] * b[0]
}

/// Drag-only loads: `F = -1/2 rho C_D |v| v S`, moment from the offset
/// between centre of pressure and cg.
pub fn simplified_forces<S: Real>(
    state: &VehicleState<S>,
    model: &SimplifiedAero,
    scn: &NondimScenario,
) -> AeroForces<S> {
    if state.u.value().hypot(state.v.value()) < MIN_SPEED {
        return AeroForces::zero();
    }
    let speed = state.speed();
    let k = speed * (0.5 * scn.rho * model.drag_coeff * scn.s_ref);
    let body = [state.theta.cos(), state.theta.sin()];
    let arm = model.l_cp_frac - scn.cg_frac;
    AeroForces {
        fx: -(k * state.u),
        fy: -(k * state.v),
        moment: k * cross2([-state.u, -state.v], body) * arm,
    }
}

/// Analytic coefficient table standing in for CFD data.
pub fn standin_coeffs(alpha: f64) -> (f64, f64, f64) {
    let a = wrap_angle(alpha);
    let (s, c) = a.sin_cos();
    let cn = 2.2 * s * s.abs();
    let ca = 0.15 * c * c.abs();
    let cl = cn * c - ca * s;
    let cd = cn * s + ca * c + 0.05;
    let cm = (STANDIN_CP_FRAC - STANDIN_CG_FRAC) * cn;
    (cl, cd, cm)
}

/// Uniform grid of `n` angles over `[0, 2pi)` labelled by [`standin_coeffs`].
pub fn generate_dataset(n: usize) -> Result<Vec<CoeffSample>> {
    if n < 4 {
        return Err(NumericError::Invalid(format!("dataset needs at least 4 samples, got {n}")).into());
    }
    Ok((0..n)
        .map(|i| {
            let alpha = std::f64::consts::TAU * i as f64 / n as f64;
            let (cl, cd, cm) = standin_coeffs(alpha);
            CoeffSample { alpha, cl, cd, cm }
        })
        .collect())
}

pub fn dataset_to_csv(data: &[CoeffSample]) -> String {
    let mut out = String::from("alpha_deg,CL,CD,CM\n");
    for s in data {
        out.push_str(&format!("{},{},{},{}\n", s.alpha.to_degrees(), s.cl, s.cd, s.cm));
    }
    out
}

impl MlpSurrogate {
    /// Glorot-uniform weights, zero biases.
    pub fn init(hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![2];
        sizes.extend_from_slice(hidden);
        sizes.push(3);
        let layers = sizes
            .windows(2)
            .map(|p| {
                let (cols, rows) = (p[0], p[1]);
                let lim = (6.0 / (rows + cols) as f64).sqrt();
                Layer {
                    rows,
                    cols,
                    w: (0..rows * cols).map(|_| rng.gen_range(-lim..lim)).collect(),
                    b: vec![0.0; rows],
                }
            })
            .collect();
        MlpSurrogate {
            layers,
            activation: "tanh".to_string(),
            meta: SurrogateMeta::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::Format(format!("surrogate weights: {m}"));
        if self.activation != "tanh" {
            return Err(bad("only tanh activation is supported"));
        }
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(bad("no layers")),
        };
        if first.cols != 2 {
            return Err(bad("first layer must take 2 inputs"));
        }
        if last.rows != 3 {
            return Err(bad("last layer must produce 3 outputs"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.len() != l.rows * l.cols || l.b.len() != l.rows {
                return Err(bad(&format!("layer {i} shape mismatch")));
            }
            if i > 0 && self.layers[i - 1].rows != l.cols {
                return Err(bad(&format!("layer {i} input width mismatch")));
            }
            if l.w.iter().chain(&l.b).any(|x| !x.is_finite()) {
                return Err(bad(&format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let m: MlpSurrogate = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    /// Forward pass on the encoded input, also returning the derivative of
    /// each output along the input direction `dx`.
    fn forward_tangent(&self, x: [f64; 2], dx: [f64; 2]) -> ([f64; 3], [f64; 3]) {
        let mut h = x.to_vec();
        let mut dh = dx.to_vec();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = l.b.clone();
            let mut dz = vec![0.0; l.rows];
            for r in 0..l.rows {
                let row = &l.w[r * l.cols..(r + 1) * l.cols];
                for c in 0..l.cols {
                    z[r] += row[c] * h[c];
                    dz[r] += row[c] * dh[c];
                }
            }
            if li < last {
                for r in 0..l.rows {
                    let t = z[r].tanh();
                    dz[r] *= 1.0 - t * t;
                    z[r] = t;
                }
            }
            h = z;
            dh = dz;
        }
        ([h[0], h[1], h[2]], [dh[0], dh[1], dh[2]])
    }

    /// Coefficients and their derivatives with respect to alpha.
    pub fn forward_with_slope(&self, alpha: f64) -> ([f64; 3], [f64; 3]) {
        let (s, c) = wrap_angle(alpha).sin_cos();
        self.forward_tangent([s, c], [c, -s])
    }
}

pub fn mlp_forward(model: &MlpSurrogate, alpha: f64) -> (f64, f64, f64) {
    let (y, _) = model.forward_with_slope(alpha);
    (y[0], y[1], y[2])
}

/// Loads from the learned coefficients: drag along `-v`, lift along `v`
/// rotated by +90 degrees, moment `q S L C_M` about the cg.
pub fn surrogate_forces<S: Real>(
    state: &VehicleState<S>,
    model: &MlpSurrogate,
    scn: &NondimScenario,
) -> AeroForces<S> {
    if state.u.value().hypot(state.v.value()) < MIN_SPEED {
        return AeroForces::zero();
    }
    let alpha = angle_of_attack_ad(state);
    let (y, dy) = model.forward_with_slope(alpha.value());
    let cl = alpha.lift(y[0], dy[0]);
    let cd = alpha.lift(y[1], dy[1]);
    let cm = alpha.lift(y[2], dy[2]);
    let speed = state.speed();
    // q S / |v| times the velocity components gives q S along v-hat.
    let k = speed * (0.5 * scn.rho * scn.s_ref);
    let (u, v) = (state.u, state.v);
    AeroForces {
        fx: -(k * (cd * u + cl * v)),
        fy: k * (cl * u - cd * v),
        moment: k * speed * cm,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            learning_rate: 1e-3,
            epochs: 20_000,
        }
    }
}

/// Full-batch Adam on the joint mean squared error of all three outputs.
pub fn train_surrogate(
    data: &[CoeffSample],
    hyper: &TrainerConfig,
    seed: u64,
) -> Result<MlpSurrogate> {
    if data.is_empty() {
        return Err(NumericError::Invalid("empty training set".into()).into());
    }
    let mut model = MlpSurrogate::init(&hyper.hidden, seed);
    let mut params = flatten(&model);
    let mut state = AdamState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut loss = f64::NAN;
    for epoch in 0..hyper.epochs {
        loss = batch_gradient(&model, data, &mut grad);
        if !loss.is_finite() {
            return Err(NumericError::TrainingDiverged { epoch }.into());
        }
        adam_step(&mut params, &grad, &mut state, hyper.learning_rate, 0.9, 0.999, 1e-8)
            .map_err(|_| NumericError::TrainingDiverged { epoch })?;
        unflatten(&mut model, &params);
    }
    if hyper.epochs > 0 {
        loss = batch_gradient(&model, data, &mut grad);
    }
    model.meta = SurrogateMeta {
        training_loss: loss,
        samples: data.len(),
        seed,
        epochs: hyper.epochs,
    };
    Ok(model)
}

fn flatten(model: &MlpSurrogate) -> Vec<f64> {
    model
        .layers
        .iter()
        .flat_map(|l| l.w.iter().chain(&l.b).copied())
        .collect()
}

fn unflatten(model: &mut MlpSurrogate, params: &[f64]) {
    let mut off = 0;
    for l in &mut model.layers {
        let nw = l.w.len();
        l.w.copy_from_slice(&params[off..off + nw]);
        off += nw;
        let nb = l.b.len();
        l.b.copy_from_slice(&params[off..off + nb]);
        off += nb;
    }
}

/// Writes the MSE gradient (in flattened layout) into `grad`, returns the MSE.
fn batch_gradient(model: &MlpSurrogate, data: &[CoeffSample], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / (3.0 * data.len() as f64);
    let n_layers = model.layers.len();
    let mut offsets = Vec::with_capacity(n_layers);
    let mut off = 0;
    for l in &model.layers {
        offsets.push(off);
        off += l.w.len() + l.b.len();
    }
    let mut sse = 0.0;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    for sample in data {
        acts.clear();
        let (s, c) = wrap_angle(sample.alpha).sin_cos();
        acts.push(vec![s, c]);
        for (li, l) in model.layers.iter().enumerate() {
            let h = &acts[li];
            let mut z = l.b.clone();
            for r in 0..l.rows {
                let row = &l.w[r * l.cols..(r + 1) * l.cols];
                z[r] += row.iter().zip(h).map(|(w, x)| w * x).sum::<f64>();
            }
            if li + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        let out = &acts[n_layers];
        let target = [sample.cl, sample.cd, sample.cm];
        let mut delta: Vec<f64> = (0..3)
            .map(|i| {
                let e = out[i] - target[i];
                sse += e * e;
                2.0 * e * scale
            })
            .collect();
        for li in (0..n_layers).rev() {
            let l = &model.layers[li];
            let h = &acts[li];
            let base = offsets[li];
            for r in 0..l.rows {
                for c in 0..l.cols {
                    grad[base + r * l.cols + c] += delta[r] * h[c];
                }
                grad[base + l.w.len() + r] += delta[r];
            }
            if li > 0 {
                let mut prev = vec![0.0; l.cols];
                for r in 0..l.rows {
                    for c in 0..l.cols {
                        prev[c] += l.w[r * l.cols + c] * delta[r];
                    }
                }
                for (p, a) in prev.iter_mut().zip(h) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
    sse * scale
}

/// Maximum absolute error per coefficient over a dataset.
pub fn fit_report(model: &MlpSurrogate, data: &[CoeffSample]) -> [f64; 3] {
    let mut worst = [0.0f64; 3];
    for s in data {
        let (cl, cd, cm) = mlp_forward(model, s.alpha);
        worst[0] = worst[0].max((cl - s.cl).abs());
        worst[1] = worst[1].max((cd - s.cd).abs());
        worst[2] = worst[2].max((cm - s.cm).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::scenario::{deg, nondimensionalize, preset};
    use std::f64::consts::{FRAC_PI_2, TAU};

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
    fn standin_at_zero_and_ninety_degrees() {
        let (cl, cd, cm) = standin_coeffs(0.0);
        assert_eq!(cl, 0.0);
        assert!((cd - 0.20).abs() < 1e-15);
        assert_eq!(cm, 0.0);
        let (cl, cd, cm) = standin_coeffs(FRAC_PI_2);
        assert!(cl.abs() < 1e-15);
        assert!((cd - 2.25).abs() < 1e-15);
        assert!((cm + 0.11).abs() < 1e-15);
    }

    #[test]
    fn standin_is_periodic_on_exact_shifts() {
        // Multiples of 2^-47 keep `a + TAU` exact for |a| < 8.
        for i in 0..200u64 {
            let a = (i * 0x1d3f_4e2b_a19) as f64 % 2f64.powi(49) * 2f64.powi(-47) % TAU;
            assert_eq!(standin_coeffs(a), standin_coeffs(a + TAU));
            assert_eq!(standin_coeffs(a), standin_coeffs(a - TAU));
        }
    }

    #[test]
    fn dataset_grid() {
        let d = generate_dataset(36).unwrap();
        assert_eq!(d.len(), 36);
        for (i, s) in d.iter().enumerate() {
            assert!((s.alpha.to_degrees() - 10.0 * i as f64).abs() < 1e-12);
            assert_eq!((s.cl, s.cd, s.cm), standin_coeffs(s.alpha));
        }
        for w in d.windows(2) {
            assert!((w[1].alpha - w[0].alpha - TAU / 36.0).abs() < 1e-14);
        }
        assert!(generate_dataset(3).is_err());
        let csv = dataset_to_csv(&d);
        assert!(csv.starts_with("alpha_deg,CL,CD,CM\n"));
        assert_eq!(csv.lines().count(), 37);
    }

    #[test]
    fn zero_speed_means_zero_loads() {
        let s = scn();
        let x = state(0.0, 0.0, 1.0);
        let m = MlpSurrogate::init(&[4], 1);
        assert_eq!(simplified_forces(&x, &SimplifiedAero { drag_coeff: 1.0, l_cp_frac: 0.55 }, &s), AeroForces::zero());
        assert_eq!(surrogate_forces(&x, &m, &s), AeroForces::zero());
    }

    #[test]
    fn simplified_drag_opposes_velocity_and_scales_quadratically() {
        let s = scn();
        let m = SimplifiedAero {
            drag_coeff: 1.0,
            l_cp_frac: 0.55,
        };
        let x = state(-0.05, -0.3, 2.9);
        let f = simplified_forces(&x, &m, &s);
        let power = f.fx * x.u + f.fy * x.v;
        let speed = x.u.hypot(x.v);
        let expect = -0.5 * s.rho * s.s_ref * speed.powi(3);
        assert!((power - expect).abs() < 1e-12 * expect.abs());
        let f2 = simplified_forces(&state(-0.1, -0.6, 2.9), &m, &s);
        let ratio = f2.fx.hypot(f2.fy) / f.fx.hypot(f.fy);
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn simplified_moment_sign_in_belly_flop() {
        let s = scn();
        let m = SimplifiedAero {
            drag_coeff: 1.0,
            l_cp_frac: 0.55,
        };
        let v0 = 0.3;
        let f = simplified_forces(&state(0.0, -v0, deg(170.0)), &m, &s);
        let oracle = (0.55 - 0.60) * 0.5 * s.rho * s.s_ref * v0 * (-v0 * deg(170.0).cos());
        assert!(f.moment < 0.0);
        assert!((f.moment - oracle).abs() < 1e-15);
    }

    /// Wind-frame loads assembled from explicit unit vectors and the exact
    /// table, as an oracle for the surrogate force algebra.
    fn table_loads(x: &VehicleState, s: &NondimScenario) -> AeroForces {
        let alpha = crate::dynamics::angle_of_attack(x);
        let (cl, cd, cm) = standin_coeffs(alpha);
        let speed = x.u.hypot(x.v);
        let q = 0.5 * s.rho * speed * speed * s.s_ref;
        let vhat = [x.u / speed, x.v / speed];
        let lhat = [-vhat[1], vhat[0]];
        AeroForces {
            fx: q * (-cd * vhat[0] + cl * lhat[0]),
            fy: q * (-cd * vhat[1] + cl * lhat[1]),
            moment: q * cm,
        }
    }

    #[test]
    fn surrogate_force_algebra_matches_unit_vector_oracle() {
        let s = scn();
        let m = MlpSurrogate::init(&[8, 8], 3);
        for &(u, v, th) in &[(-0.05, -0.3, deg(170.0)), (0.0, -0.2, deg(90.0)), (0.1, 0.05, 0.3), (-0.2, 0.1, 4.0)] {
            let x = state(u, v, th);
            let f = surrogate_forces(&x, &m, &s);
            let (cl, cd, cm) = mlp_forward(&m, crate::dynamics::angle_of_attack(&x));
            let speed = u.hypot(v);
            let q = 0.5 * s.rho * speed * speed * s.s_ref;
            let fx = q * (-cd * u / speed - cl * v / speed);
            let fy = q * (-cd * v / speed + cl * u / speed);
            assert!((f.fx - fx).abs() < 1e-14, "{} vs {fx}", f.fx);
            assert!((f.fy - fy).abs() < 1e-14);
            assert!((f.moment - q * cm).abs() < 1e-14);
        }
    }

    #[test]
    fn standin_moment_agrees_in_sign_with_drag_model() {
        let s = scn();
        let x = state(-18.82 / 335.57, -106.73 / 335.57, deg(170.0));
        let table = table_loads(&x, &s);
        let drag = simplified_forces(&x, &SimplifiedAero { drag_coeff: 1.0, l_cp_frac: 0.55 }, &s);
        assert!(table.moment < 0.0 && drag.moment < 0.0);
    }

    #[test]
    fn lift_is_perpendicular_and_drag_opposes_motion() {
        let s = scn();
        let m = MlpSurrogate::init(&[8, 8], 3);
        for &(u, v, th) in &[(-0.05, -0.3, 2.9), (0.3, 0.01, -1.0), (0.0, -0.2, 1.57)] {
            let x = state(u, v, th);
            let f = surrogate_forces(&x, &m, &s);
            let (cl, cd, _) = mlp_forward(&m, crate::dynamics::angle_of_attack(&x));
            let k = x.u.hypot(x.v) * 0.5 * s.rho * s.s_ref;
            let lift = [f.fx + k * cd * x.u, f.fy + k * cd * x.v];
            assert!((lift[0] * x.u + lift[1] * x.v).abs() < 1e-14);
            assert!((lift[0].hypot(lift[1]) - k * cl.abs() * x.u.hypot(x.v)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_lift_angle_gives_pure_drag() {
        let s = scn();
        // alpha = 90 degrees: velocity straight down, body pointing left.
        let x = state(0.0, -0.3, std::f64::consts::PI);
        let a = table_loads(&x, &s);
        assert!(a.fx.abs() < 1e-15);
        assert!(a.fy > 0.0);
    }

    #[test]
    fn zero_network_outputs_its_bias() {
        let mut m = MlpSurrogate::init(&[5], 0);
        for l in &mut m.layers {
            l.w.iter_mut().for_each(|w| *w = 0.0);
            l.b.iter_mut().for_each(|b| *b = 0.0);
        }
        m.layers[1].b = vec![0.1, -0.2, 0.3];
        for a in [0.0, 1.0, 4.0] {
            assert_eq!(mlp_forward(&m, a), (0.1, -0.2, 0.3));
        }
    }

    #[test]
    fn mlp_periodic_on_exact_shifts() {
        let m = MlpSurrogate::init(&[32, 32], 11);
        for i in 0..100 {
            let a = (i as f64) * 0.0625;
            assert_eq!(mlp_forward(&m, a), mlp_forward(&m, a + TAU));
        }
    }

    #[test]
    fn mlp_alpha_slope_matches_finite_differences() {
        use rand::Rng;
        let m = MlpSurrogate::init(&[32, 32], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let a = rng.gen_range(0.01..TAU - 0.01);
            let (_, dy) = m.forward_with_slope(a);
            let h = 1e-5;
            let (p, mn) = (m.forward_with_slope(a + h).0, m.forward_with_slope(a - h).0);
            for i in 0..3 {
                let fd = (p[i] - mn[i]) / (2.0 * h);
                assert!((dy[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{} vs {fd}", dy[i]);
            }
        }
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let data = generate_dataset(8).unwrap();
        let m = MlpSurrogate::init(&[4, 3], 2);
        let p = flatten(&m);
        let mut g = vec![0.0; p.len()];
        batch_gradient(&m, &data, &mut g);
        let mut scratch = vec![0.0; p.len()];
        for i in (0..p.len()).step_by(3) {
            let mut mp = m.clone();
            let mut q = p.clone();
            q[i] += 1e-6;
            unflatten(&mut mp, &q);
            let lp = batch_gradient(&mp, &data, &mut scratch);
            q[i] -= 2e-6;
            unflatten(&mut mp, &q);
            let lm = batch_gradient(&mp, &data, &mut scratch);
            let fd = (lp - lm) / 2e-6;
            assert!((g[i] - fd).abs() < 1e-7, "param {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn surrogate_loads_differentiate_correctly() {
        let s = scn();
        let m = MlpSurrogate::init(&[8], 4);
        let x0 = state(-0.05, -0.3, 2.9);
        let tape = Tape::new();
        let x = x0.lift(&tape);
        let f = surrogate_forces(&x, &m, &s);
        let adj = tape.backward(f.moment);
        let h = 1e-7;
        let mut up = x0;
        up.u += h;
        let mut dn = x0;
        dn.u -= h;
        let fd = (surrogate_forces(&up, &m, &s).moment - surrogate_forces(&dn, &m, &s).moment) / (2.0 * h);
        assert!((adj.wrt(x.u) - fd).abs() < 1e-6 * fd.abs().max(1e-6));
    }

    #[test]
    fn repeated_sample_fits_a_constant() {
        let one = CoeffSample {
            alpha: 1.0,
            cl: 0.3,
            cd: 1.1,
            cm: -0.04,
        };
        let cfg = TrainerConfig {
            hidden: vec![8],
            learning_rate: 1e-2,
            epochs: 2000,
        };
        let m = train_surrogate(&[one; 5], &cfg, 1).unwrap();
        let (cl, cd, cm) = mlp_forward(&m, 1.0);
        assert!((cl - 0.3).abs() < 1e-3 && (cd - 1.1).abs() < 1e-3 && (cm + 0.04).abs() < 1e-3);
    }

    #[test]
    fn training_is_deterministic() {
        let data = generate_dataset(12).unwrap();
        let cfg = TrainerConfig {
            hidden: vec![6],
            learning_rate: 1e-3,
            epochs: 50,
        };
        let a = train_surrogate(&data, &cfg, 42).unwrap();
        let b = train_surrogate(&data, &cfg, 42).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(train_surrogate(&[], &cfg, 1).is_err());
    }

    #[test]
    fn weights_reject_wrong_shapes() {
        let mut m = MlpSurrogate::init(&[4], 0);
        m.layers[0].cols = 3;
        assert!(m.validate().is_err());
        let mut m = MlpSurrogate::init(&[4], 0);
        m.layers[1].b[0] = f64::NAN;
        assert!(m.validate().is_err());
    }
}
