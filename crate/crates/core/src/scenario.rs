//! Physical constants, reference quantities and scenario files.
//!
//! A scenario is a single JSON document. Fields missing from a user file are
//! filled from a base preset (`case1` unless the file names another one in
//! `"base"`), then the merged document is deserialized strictly and
//! validated. All downstream numerics run on the [`NondimScenario`] produced
//! by [`nondimensionalize`].

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::VehicleState;
use crate::error::ScenarioError;
use crate::optimizer::OptimizerConfig;
use crate::rollout::LossWeights;

const CASE1_JSON: &str = include_str!("../presets/case1.json");
const CASE2_JSON: &str = include_str!("../presets/case2.json");

/// Names accepted by [`preset`] and by the CLI `--scenario` flag.
pub const PRESET_NAMES: [&str; 2] = ["case1", "case2"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceQuantities {
    #[serde(rename = "L_ref_m")]
    pub length: f64,
    #[serde(rename = "v_ref_mps")]
    pub speed: f64,
    #[serde(rename = "m_ref_kg")]
    pub mass: f64,
    #[serde(rename = "rho_kgpm3")]
    pub rho: f64,
    #[serde(rename = "g0_mps2")]
    pub g0: f64,
}

impl ReferenceQuantities {
    /// Reference time `L_ref / v_ref`, always derived.
    pub fn time(&self) -> f64 {
        self.length / self.speed
    }

    pub fn force(&self) -> f64 {
        self.mass * self.speed * self.speed / self.length
    }

    pub fn moment(&self) -> f64 {
        self.force() * self.length
    }

    pub fn inertia(&self) -> f64 {
        self.mass * self.length * self.length
    }

    pub fn density(&self) -> f64 {
        self.mass / (self.length * self.length * self.length)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        positive("refs.L_ref_m", self.length)?;
        positive("refs.v_ref_mps", self.speed)?;
        positive("refs.m_ref_kg", self.mass)?;
        positive("refs.rho_kgpm3", self.rho)?;
        positive("refs.g0_mps2", self.g0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    #[serde(rename = "J_z_kgm2")]
    pub inertia: f64,
    #[serde(rename = "I_sp_s")]
    pub isp: f64,
    #[serde(rename = "m_wet_kg")]
    pub m_wet: f64,
    #[serde(rename = "m_dry_kg")]
    pub m_dry: f64,
    /// Centre of gravity measured from the nose tip, as a fraction of `L_ref`.
    pub l_cg_frac: f64,
    #[serde(rename = "T_max_N")]
    pub thrust_max: f64,
    pub throttle_min_frac: f64,
    pub delta_max_deg: f64,
    #[serde(rename = "T_d_s")]
    pub lag_time: f64,
    pub eps_corr: f64,
    pub eta_corr: f64,
    #[serde(rename = "S_ref_m2")]
    pub s_ref: f64,
}

impl VehicleParams {
    fn validate(&self) -> Result<(), ScenarioError> {
        positive("vehicle.J_z_kgm2", self.inertia)?;
        positive("vehicle.I_sp_s", self.isp)?;
        positive("vehicle.m_wet_kg", self.m_wet)?;
        positive("vehicle.m_dry_kg", self.m_dry)?;
        if self.m_dry >= self.m_wet {
            return Err(invalid("vehicle.m_dry_kg", "must be smaller than m_wet_kg"));
        }
        if !(self.l_cg_frac > 0.0 && self.l_cg_frac < 1.0) {
            return Err(invalid("vehicle.l_cg_frac", "must lie in (0, 1)"));
        }
        positive("vehicle.T_max_N", self.thrust_max)?;
        if !(self.throttle_min_frac > 0.0 && self.throttle_min_frac < 1.0) {
            return Err(invalid("vehicle.throttle_min_frac", "must lie in (0, 1)"));
        }
        positive("vehicle.delta_max_deg", self.delta_max_deg)?;
        positive("vehicle.T_d_s", self.lag_time)?;
        finite("vehicle.eps_corr", self.eps_corr)?;
        finite("vehicle.eta_corr", self.eta_corr)?;
        positive("vehicle.S_ref_m2", self.s_ref)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditions {
    pub r0_m: [f64; 2],
    pub v0_mps: [f64; 2],
    /// Recorded for completeness; acceleration is not a state variable.
    pub a0_mps2: [f64; 2],
    pub theta0_deg: f64,
    pub omega0_radps: f64,
    pub r_f_m: [f64; 2],
    pub v_f_mps: [f64; 2],
    pub theta_f_deg: f64,
    pub omega_f_radps: f64,
    pub t_flip_max_s: f64,
}

impl BoundaryConditions {
    fn validate(&self) -> Result<(), ScenarioError> {
        let all = [
            ("bc.r0_m", self.r0_m[0]),
            ("bc.r0_m", self.r0_m[1]),
            ("bc.v0_mps", self.v0_mps[0]),
            ("bc.v0_mps", self.v0_mps[1]),
            ("bc.a0_mps2", self.a0_mps2[0]),
            ("bc.a0_mps2", self.a0_mps2[1]),
            ("bc.theta0_deg", self.theta0_deg),
            ("bc.omega0_radps", self.omega0_radps),
            ("bc.r_f_m", self.r_f_m[0]),
            ("bc.r_f_m", self.r_f_m[1]),
            ("bc.v_f_mps", self.v_f_mps[0]),
            ("bc.v_f_mps", self.v_f_mps[1]),
            ("bc.theta_f_deg", self.theta_f_deg),
            ("bc.omega_f_radps", self.omega_f_radps),
        ];
        for (name, v) in all {
            finite(name, v)?;
        }
        if !(self.t_flip_max_s >= 0.0) {
            return Err(invalid("bc.t_flip_max_s", "must be non-negative"));
        }
        Ok(())
    }
}

/// Which aerodynamic model a scenario uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AeroSpec {
    Simplified {
        #[serde(rename = "C_D")]
        drag_coeff: f64,
        l_cp_frac: f64,
    },
    /// Loads weights from `weights_path` when given; otherwise trains on the
    /// stand-in table with the default trainer and the scenario seed.
    Surrogate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights_path: Option<String>,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Aerodynamic forces disabled.
    None,
}

fn default_samples() -> usize {
    36
}

impl AeroSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AeroSpec::Simplified { .. } => "simplified",
            AeroSpec::Surrogate { .. } => "surrogate",
            AeroSpec::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub refs: ReferenceQuantities,
    pub vehicle: VehicleParams,
    pub bc: BoundaryConditions,
    #[serde(rename = "K")]
    pub steps: usize,
    pub t_f_s: f64,
    pub aero: AeroSpec,
    pub loss_weights: LossWeights,
    pub opt: OptimizerConfig,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.refs.validate()?;
        self.vehicle.validate()?;
        self.bc.validate()?;
        if self.steps < 1 {
            return Err(invalid("K", "must be at least 1"));
        }
        positive("t_f_s", self.t_f_s)?;
        match &self.aero {
            AeroSpec::Simplified {
                drag_coeff,
                l_cp_frac,
            } => {
                if !(*drag_coeff >= 0.0) || !drag_coeff.is_finite() {
                    return Err(invalid("aero.C_D", "must be finite and non-negative"));
                }
                if !(*l_cp_frac > 0.0 && *l_cp_frac < 1.0) {
                    return Err(invalid("aero.l_cp_frac", "must lie in (0, 1)"));
                }
            }
            AeroSpec::Surrogate { samples, .. } => {
                if *samples < 4 {
                    return Err(invalid("aero.samples", "must be at least 4"));
                }
            }
            AeroSpec::None => {}
        }
        self.loss_weights.validate()?;
        self.opt.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Returns an embedded preset by name.
pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let value: Value = serde_json::from_str(preset_text(name)?).expect("embedded preset is valid JSON");
    finish(value, format!("preset {name}"))
}

fn preset_text(name: &str) -> Result<&'static str, ScenarioError> {
    match name {
        "case1" => Ok(CASE1_JSON),
        "case2" => Ok(CASE2_JSON),
        other => Err(ScenarioError::UnknownPreset {
            name: other.to_string(),
            valid: PRESET_NAMES.join(", "),
        }),
    }
}

/// Loads a scenario from a preset name or a JSON file path.
pub fn resolve_scenario(spec: &str) -> Result<ScenarioConfig, ScenarioError> {
    if PRESET_NAMES.contains(&spec) {
        return preset(spec);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(ScenarioError::UnknownPreset {
            name: spec.to_string(),
            valid: PRESET_NAMES.join(", "),
        });
    }
    load_scenario(path)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_scenario(&text, Some(path))
}

/// Parses scenario JSON, filling missing fields from the base preset.
pub fn parse_scenario(text: &str, origin: Option<&Path>) -> Result<ScenarioConfig, ScenarioError> {
    let origin_name = origin.map_or_else(|| "<inline>".to_string(), |p| p.display().to_string());
    let user: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        origin: origin_name.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(mut user) = user else {
        return Err(invalid("<root>", "scenario must be a JSON object"));
    };
    let base_name = match user.remove("base") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(invalid("base", "must be a preset name")),
        None => None,
    };
    let base_text = preset_text(base_name.as_deref().unwrap_or("case1"))?;
    let mut merged: Value = serde_json::from_str(base_text).expect("embedded preset is valid JSON");
    merge(&mut merged, Value::Object(user));
    finish(merged, origin_name)
}

fn finish(value: Value, origin: String) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig =
        serde_path_to_error::deserialize(value).map_err(|e| ScenarioError::Field {
            origin,
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // Switching aero kind replaces the whole block.
                    Some(slot) if k != "aero" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, "must be finite and strictly positive"))
    }
}

fn finite(field: &'static str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

pub(crate) fn invalid(field: &str, reason: &str) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// Everything the integrator, aero models and loss need, in nondimensional
/// units (lengths / `L_ref`, speeds / `v_ref`, masses / `m_ref`, times /
/// `t_ref`). Angles stay in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct NondimScenario {
    pub refs: ReferenceQuantities,
    pub steps: usize,
    pub dt: f64,
    pub gravity: f64,
    pub inertia: f64,
    /// Effective exhaust velocity `I_sp g0 / v_ref`.
    pub exhaust_velocity: f64,
    pub thrust_max: f64,
    pub thrust_min: f64,
    pub delta_max: f64,
    pub lag_time: f64,
    pub cg_frac: f64,
    /// Distance from the cg to the gimbal point at the base.
    pub engine_arm: f64,
    pub eps_corr: f64,
    pub eta_corr: f64,
    pub rho: f64,
    pub s_ref: f64,
    pub m_wet: f64,
    pub m_dry: f64,
    pub initial: VehicleState,
    pub r_f: [f64; 2],
    pub v_f: [f64; 2],
    pub theta_f: f64,
    pub omega_f: f64,
    pub t_flip_max: f64,
    pub weights: LossWeights,
}

impl NondimScenario {
    /// Rollout horizon, defined as `dt * K`.
    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Nondimensional time of grid node `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    /// Thrust that balances the initial weight, clamped to the throttle range.
    pub fn hover_thrust(&self) -> f64 {
        (self.m_wet * self.gravity).clamp(self.thrust_min, self.thrust_max)
    }

    /// Same scenario with a different step count and unchanged `dt`.
    pub fn with_steps(&self, steps: usize) -> Self {
        Self {
            steps,
            ..self.clone()
        }
    }
}

pub fn deg(v: f64) -> f64 {
    v * PI / 180.0
}

pub fn nondimensionalize(cfg: &ScenarioConfig) -> NondimScenario {
    let refs = cfg.refs.clone();
    let l = refs.length;
    let vr = refs.speed;
    let m = refs.mass;
    let t = refs.time();
    let f = refs.force();
    let veh = &cfg.vehicle;
    let bc = &cfg.bc;
    let thrust_max = veh.thrust_max / f;
    NondimScenario {
        steps: cfg.steps,
        dt: cfg.t_f_s / t / cfg.steps as f64,
        gravity: refs.g0 * l / (vr * vr),
        inertia: veh.inertia / refs.inertia(),
        exhaust_velocity: veh.isp * refs.g0 / vr,
        thrust_max,
        thrust_min: veh.throttle_min_frac * thrust_max,
        delta_max: deg(veh.delta_max_deg),
        lag_time: veh.lag_time / t,
        cg_frac: veh.l_cg_frac,
        engine_arm: 1.0 - veh.l_cg_frac,
        eps_corr: veh.eps_corr,
        eta_corr: veh.eta_corr,
        rho: refs.rho / refs.density(),
        s_ref: veh.s_ref / (l * l),
        m_wet: veh.m_wet / m,
        m_dry: veh.m_dry / m,
        initial: VehicleState {
            x: bc.r0_m[0] / l,
            y: bc.r0_m[1] / l,
            theta: deg(bc.theta0_deg),
            u: bc.v0_mps[0] / vr,
            v: bc.v0_mps[1] / vr,
            omega: bc.omega0_radps * t,
            mass: veh.m_wet / m,
            delta_d: 0.0,
        },
        r_f: [bc.r_f_m[0] / l, bc.r_f_m[1] / l],
        v_f: [bc.v_f_mps[0] / vr, bc.v_f_mps[1] / vr],
        theta_f: deg(bc.theta_f_deg),
        omega_f: bc.omega_f_radps * t,
        t_flip_max: bc.t_flip_max_s / t,
        weights: cfg.loss_weights.clone(),
        refs,
    }
}

/// Nondimensional state to SI (m, m/s, rad, rad/s, kg, rad).
pub fn state_to_si(s: &VehicleState, refs: &ReferenceQuantities) -> VehicleState {
    let t = refs.time();
    VehicleState {
        x: s.x * refs.length,
        y: s.y * refs.length,
        theta: s.theta,
        u: s.u * refs.speed,
        v: s.v * refs.speed,
        omega: s.omega / t,
        mass: s.mass * refs.mass,
        delta_d: s.delta_d,
    }
}

/// SI state to nondimensional; exact inverse of [`state_to_si`] up to rounding.
pub fn state_from_si(s: &VehicleState, refs: &ReferenceQuantities) -> VehicleState {
    let t = refs.time();
    VehicleState {
        x: s.x / refs.length,
        y: s.y / refs.length,
        theta: s.theta,
        u: s.u / refs.speed,
        v: s.v / refs.speed,
        omega: s.omega * t,
        mass: s.mass / refs.mass,
        delta_d: s.delta_d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_table_values() {
        let c1 = preset("case1").unwrap();
        assert_eq!(c1.vehicle.inertia, 1.25e7);
        assert_eq!(c1.bc.r_f_m, [-360.0, -1200.0]);
        let c2 = preset("case2").unwrap();
        assert_eq!(c2.vehicle.inertia, 3.2e7);
        assert_eq!(c2.bc.r_f_m, [-287.5, -750.0]);
        for c in [&c1, &c2] {
            assert_eq!(c.vehicle.isp, 350.0);
            assert_eq!(c.vehicle.m_wet, 135_000.0);
            assert_eq!(c.vehicle.m_dry, 120_000.0);
            assert_eq!(c.vehicle.l_cg_frac, 0.6);
            assert_eq!(c.refs.length, 50.0);
            assert_eq!(c.refs.speed, 335.57);
            assert_eq!(c.refs.mass, 24_000.0);
            assert_eq!(c.vehicle.thrust_max, 2_300_000.0);
            assert_eq!(c.vehicle.throttle_min_frac, 0.25);
            assert_eq!(c.vehicle.delta_max_deg, 10.0);
            assert_eq!(c.vehicle.eps_corr, 1.0);
            assert_eq!(c.vehicle.eta_corr, 1.0);
            assert_eq!(c.bc.t_flip_max_s, 2.4);
            assert_eq!(c.bc.theta0_deg, 170.0);
            assert_eq!(c.bc.r0_m, [0.0, 0.0]);
            assert_eq!(c.bc.v0_mps, [-18.82, -106.73]);
            assert_eq!(c.bc.a0_mps2, [0.0, 0.0]);
            assert_eq!(c.bc.omega0_radps, 0.0);
            assert_eq!(c.bc.theta_f_deg, 90.0);
            assert_eq!(c.bc.v_f_mps, [0.0, -0.1]);
            assert_eq!(c.bc.omega_f_radps, 0.0);
            assert_eq!(c.steps, 90);
        }
    }

    #[test]
    fn presets_survive_serialization() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            let back = parse_scenario(&c.to_json(), None).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn missing_fields_come_from_the_base_preset() {
        let c = parse_scenario(r#"{"base": "case2", "K": 12}"#, None).unwrap();
        assert_eq!(c.steps, 12);
        assert_eq!(c.vehicle.inertia, 3.2e7);
        let d = parse_scenario(r#"{"vehicle": {"J_z_kgm2": 2.0e7}}"#, None).unwrap();
        assert_eq!(d.vehicle.inertia, 2.0e7);
        assert_eq!(d.vehicle.m_wet, 135_000.0);
    }

    #[test]
    fn dry_mass_above_wet_mass_is_rejected() {
        let err = parse_scenario(r#"{"vehicle": {"m_dry_kg": 140000.0}}"#, None).unwrap_err();
        assert!(err.to_string().contains("m_dry"), "{err}");
    }

    #[test]
    fn syntax_errors_report_line_and_column() {
        let err = parse_scenario("{\n  \"K\": 90,\n  oops\n}", None).unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = parse_scenario(r#"{"vehicle": {"I_sp_s": "fast"}}"#, None).unwrap_err();
        assert!(err.to_string().contains("vehicle.I_sp_s"), "{err}");
        let err = parse_scenario(r#"{"vehicle": {"warp": 1}}"#, None).unwrap_err();
        assert!(err.to_string().contains("warp"), "{err}");
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let err = resolve_scenario("case9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("case1") && msg.contains("case2"), "{msg}");
    }

    #[test]
    fn reference_scales() {
        let s = nondimensionalize(&preset("case1").unwrap());
        let refs = &s.refs;
        assert_eq!(50.0 / refs.length, 1.0);
        assert_eq!(335.57 / refs.speed, 1.0);
        assert_eq!(refs.time(), refs.length / refs.speed);
        // g* = g0 L / v^2, and back again.
        let g_star = 9.80665 * 50.0 / (335.57 * 335.57);
        assert!((s.gravity - g_star).abs() < 1e-18);
        assert!((s.gravity - 4.354e-3).abs() < 5e-7);
        assert!((s.gravity * refs.speed * refs.speed / refs.length - 9.80665).abs() < 1e-12);
        assert_eq!(s.dt * s.steps as f64, s.horizon());
        assert_eq!(s.engine_arm * refs.length, 20.0);
    }

    #[test]
    fn case1_target_in_reference_lengths() {
        let s = nondimensionalize(&preset("case1").unwrap());
        assert_eq!(s.r_f, [-7.2, -24.0]);
        let si = state_to_si(
            &VehicleState {
                y: -24.0,
                ..s.initial
            },
            &s.refs,
        );
        assert_eq!(si.y, -1200.0);
        let unit = state_to_si(
            &VehicleState {
                u: 1.0,
                ..s.initial
            },
            &s.refs,
        );
        assert_eq!(unit.u, 335.57);
    }
}
