//! Run artifacts: CSV schemas, summary and manifest JSON, SVG plots.
//!
//! Everything written here is dimensional SI (angles in degrees where the
//! column name says so). Floats use Rust's shortest round-trip formatting,
//! so a value read back parses to the identical `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controls::ControlSequence;
use crate::error::{Error, Result};
use crate::optimizer::HistoryEntry;
use crate::rollout::{GradientEngine, LossBreakdown, Trajectory};
use crate::scenario::{state_to_si, NondimScenario, ScenarioConfig};

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "k",
    "t_s",
    "x_m",
    "y_m",
    "theta_deg",
    "u_mps",
    "v_mps",
    "omega_radps",
    "mass_kg",
    "delta_d_deg",
    "alpha_deg",
    "thrust_N",
    "delta_cmd_deg",
];
pub const CONTROLS_HEADER: [&str; 4] = ["k", "t_s", "thrust_N", "delta_deg"];
pub const HISTORY_HEADER: [&str; 10] = [
    "step",
    "lr",
    "total",
    "terminal_position",
    "terminal_velocity",
    "terminal_pitch",
    "terminal_omega",
    "smoothness",
    "mass_floor",
    "flip_deadline",
];

fn fmt_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| fmt_err(path, e))?;
    w.write_record(header).map_err(|e| fmt_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| fmt_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a CSV file into rows keyed by the requested columns, which must
/// all be present in the header.
pub fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| fmt_err(path, e))?;
    let header = r.headers().map_err(|e| fmt_err(path, e))?.clone();
    let idx = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| fmt_err(path, format!("missing column `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| fmt_err(path, e))?;
        rows.push(idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect());
    }
    Ok(rows)
}

fn parse_f64(path: &Path, row: usize, col: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| fmt_err(path, format!("row {row}, column {col}: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn trajectory_rows(traj: &Trajectory, scn: &NondimScenario) -> Vec<Vec<String>> {
    let refs = &scn.refs;
    let k_total = traj.steps();
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let si = state_to_si(s, refs);
            let (alpha, thrust, delta) = if k < k_total {
                (
                    Some(traj.alpha_log[k].to_degrees()),
                    Some(traj.controls.thrust[k] * refs.force()),
                    Some(traj.controls.delta[k].to_degrees()),
                )
            } else {
                (None, None, None)
            };
            vec![
                k.to_string(),
                (scn.time_at(k) * refs.time()).to_string(),
                si.x.to_string(),
                si.y.to_string(),
                si.theta.to_degrees().to_string(),
                si.u.to_string(),
                si.v.to_string(),
                si.omega.to_string(),
                si.mass.to_string(),
                si.delta_d.to_degrees().to_string(),
                opt(alpha),
                opt(thrust),
                opt(delta),
            ]
        })
        .collect()
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, scn: &NondimScenario) -> Result<()> {
    write_rows(path, &TRAJECTORY_HEADER, &trajectory_rows(traj, scn))
}

pub fn controls_rows(seq: &ControlSequence, scn: &NondimScenario) -> Vec<Vec<String>> {
    (0..seq.len())
        .map(|k| {
            vec![
                k.to_string(),
                (scn.time_at(k) * scn.refs.time()).to_string(),
                (seq.thrust[k] * scn.refs.force()).to_string(),
                seq.delta[k].to_degrees().to_string(),
            ]
        })
        .collect()
}

pub fn write_controls(path: &Path, seq: &ControlSequence, scn: &NondimScenario) -> Result<()> {
    write_rows(path, &CONTROLS_HEADER, &controls_rows(seq, scn))
}

/// Converts dimensional control rows into a nondimensional sequence.
/// Values may sit at most a few ulps outside the feasible range (rounding
/// in the unit conversion) and are pinned back onto it.
pub fn controls_from_rows(rows: &[(f64, f64)], scn: &NondimScenario) -> Result<ControlSequence> {
    let mut seq = ControlSequence {
        thrust: Vec::with_capacity(rows.len()),
        delta: Vec::with_capacity(rows.len()),
    };
    let tol = 1e-12;
    for (k, &(thrust_n, delta_deg)) in rows.iter().enumerate() {
        let t = thrust_n / scn.refs.force();
        let d = delta_deg.to_radians();
        if !(t >= scn.thrust_min * (1.0 - tol) && t <= scn.thrust_max * (1.0 + tol)) {
            return Err(Error::Format(format!(
                "controls row {k}: thrust {thrust_n} N outside the throttle range"
            )));
        }
        if !(d.abs() <= scn.delta_max * (1.0 + tol)) {
            return Err(Error::Format(format!(
                "controls row {k}: gimbal {delta_deg} deg outside the gimbal range"
            )));
        }
        seq.thrust.push(t.clamp(scn.thrust_min, scn.thrust_max));
        seq.delta.push(d.clamp(-scn.delta_max, scn.delta_max));
    }
    Ok(seq)
}

pub fn read_controls(path: &Path, scn: &NondimScenario) -> Result<ControlSequence> {
    let rows = read_columns(path, &["thrust_N", "delta_deg"])?;
    let vals = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((parse_f64(path, i, "thrust_N", &r[0])?, parse_f64(path, i, "delta_deg", &r[1])?)))
        .collect::<Result<Vec<_>>>()?;
    controls_from_rows(&vals, scn)
}

/// Passes controls through their CSV text form, so what is simulated is
/// exactly what a later `simulate` of the written file will see.
pub fn canonical_controls(seq: &ControlSequence, scn: &NondimScenario) -> Result<ControlSequence> {
    let rows = controls_rows(seq, scn)
        .iter()
        .map(|r| (r[2].parse::<f64>().expect("own output"), r[3].parse::<f64>().expect("own output")))
        .collect::<Vec<_>>();
    controls_from_rows(&rows, scn)
}

pub fn write_history(path: &Path, history: &[HistoryEntry]) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| {
            let mut r = vec![h.step.to_string(), h.lr.to_string(), h.loss.total.to_string()];
            r.extend(h.loss.terms().iter().map(|t| t.to_string()));
            r
        })
        .collect();
    write_rows(path, &HISTORY_HEADER, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalReport {
    pub position_error_m: f64,
    pub velocity_error_mps: f64,
    pub pitch_error_deg: f64,
    pub omega_error_radps: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub theta_deg: f64,
    pub u_mps: f64,
    pub v_mps: f64,
    pub omega_radps: f64,
    pub mass_kg: f64,
}

impl TerminalReport {
    pub fn is_finite(&self) -> bool {
        [
            self.position_error_m,
            self.velocity_error_mps,
            self.pitch_error_deg,
            self.omega_error_radps,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

pub fn terminal_report(traj: &Trajectory, scn: &NondimScenario) -> TerminalReport {
    let refs = &scn.refs;
    let s = traj.terminal();
    let si = state_to_si(s, refs);
    let rf = [scn.r_f[0] * refs.length, scn.r_f[1] * refs.length];
    let vf = [scn.v_f[0] * refs.speed, scn.v_f[1] * refs.speed];
    TerminalReport {
        position_error_m: (si.x - rf[0]).hypot(si.y - rf[1]),
        velocity_error_mps: (si.u - vf[0]).hypot(si.v - vf[1]),
        pitch_error_deg: (s.theta - scn.theta_f).to_degrees(),
        omega_error_radps: si.omega - scn.omega_f / refs.time(),
        x_m: si.x,
        y_m: si.y,
        theta_deg: si.theta.to_degrees(),
        u_mps: si.u,
        v_mps: si.v,
        omega_radps: si.omega,
        mass_kg: si.mass,
    }
}

/// Node of peak pitch rate, taken as the flip location.
/// Returns the node and its altitude in reference lengths.
pub fn flip_location(traj: &Trajectory) -> (usize, f64) {
    let k = traj
        .states
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.omega.abs().total_cmp(&b.1.omega.abs()))
        .map_or(0, |(k, _)| k);
    (k, traj.states[k].y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub command: String,
    pub engine: Option<GradientEngine>,
    pub aero: String,
    #[serde(rename = "K")]
    pub steps: usize,
    pub dt_s: f64,
    pub seed: u64,
    pub terminal: TerminalReport,
    pub min_mass_kg: f64,
    pub dry_mass_kg: f64,
    pub mass_floor_respected: bool,
    pub loss: LossBreakdown,
    pub flip_step: usize,
    /// Altitude of peak pitch rate over `L_ref`.
    pub flip_y_over_l: f64,
    pub best_step: Option<usize>,
    pub optimizer_steps: Option<usize>,
    pub saturated_params: Vec<usize>,
    pub wall_time_s: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn summarize(
    command: &str,
    cfg: &ScenarioConfig,
    scn: &NondimScenario,
    traj: &Trajectory,
    loss: &LossBreakdown,
    engine: Option<GradientEngine>,
    best_step: Option<usize>,
    optimizer_steps: Option<usize>,
    saturated: Vec<usize>,
    wall_time_s: f64,
) -> Summary {
    let (flip_step, flip_y) = flip_location(traj);
    let min_mass = traj.min_mass();
    Summary {
        scenario: cfg.name.clone(),
        command: command.to_string(),
        engine,
        aero: cfg.aero.kind().to_string(),
        steps: scn.steps,
        dt_s: scn.dt * scn.refs.time(),
        seed: cfg.seed,
        terminal: terminal_report(traj, scn),
        min_mass_kg: min_mass * scn.refs.mass,
        dry_mass_kg: cfg.vehicle.m_dry,
        mass_floor_respected: min_mass >= scn.m_dry,
        loss: loss.clone(),
        flip_step,
        flip_y_over_l: flip_y,
        best_step,
        optimizer_steps,
        saturated_params: saturated,
        wall_time_s,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| fmt_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Everything needed to re-run a CLI invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub args: Vec<String>,
    pub command: String,
    pub seed: u64,
    /// Resolved scenario after overrides; absent for `train-aero`.
    pub scenario: Option<ScenarioConfig>,
    /// Input file path to sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the run directory) to sha256.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(args: &[String], command: &str, cfg: Option<&ScenarioConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: args.to_vec(),
            command: command.to_string(),
            seed: cfg.map_or(0, |c| c.seed),
            scenario: cfg.cloned(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        let key = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        self.inputs.insert(key.display().to_string(), hash);
        Ok(())
    }

    pub fn add_outputs(&mut self, dir: &Path, names: &[&str]) -> Result<()> {
        for n in names {
            self.outputs.insert(n.to_string(), sha256_file(&dir.join(n))?);
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| fmt_err(path, e))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    Ok(dir.to_path_buf())
}

// ---------------------------------------------------------------------------
// SVG plots

/// A run's trajectory as read back from `trajectory.csv`.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryTable {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
    pub mass: Vec<f64>,
    pub delta_d_deg: Vec<f64>,
    pub alpha_deg: Vec<Option<f64>>,
    pub thrust: Vec<Option<f64>>,
    pub delta_cmd_deg: Vec<Option<f64>>,
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable> {
    let cols = &TRAJECTORY_HEADER[1..];
    let rows = read_columns(path, cols)?;
    let mut t = TrajectoryTable::default();
    for (i, r) in rows.iter().enumerate() {
        let f = |j: usize| parse_f64(path, i, cols[j], &r[j]);
        let o = |j: usize| -> Result<Option<f64>> {
            if r[j].trim().is_empty() {
                Ok(None)
            } else {
                f(j).map(Some)
            }
        };
        t.t.push(f(0)?);
        t.x.push(f(1)?);
        t.y.push(f(2)?);
        t.theta_deg.push(f(3)?);
        t.u.push(f(4)?);
        t.v.push(f(5)?);
        t.omega.push(f(6)?);
        t.mass.push(f(7)?);
        t.delta_d_deg.push(f(8)?);
        t.alpha_deg.push(o(9)?);
        t.thrust.push(o(10)?);
        t.delta_cmd_deg.push(o(11)?);
    }
    Ok(t)
}

struct Panel<'a> {
    title: &'a str,
    unit: &'a str,
    series: Vec<(&'a str, Vec<(f64, f64)>)>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn bounds(points: impl Iterator<Item = (f64, f64)>) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for (x, y) in points {
        b[0] = b[0].min(x);
        b[1] = b[1].max(x);
        b[2] = b[2].min(y);
        b[3] = b[3].max(y);
    }
    if !b.iter().all(|v| v.is_finite()) {
        return [0.0, 1.0, 0.0, 1.0];
    }
    for i in [0, 2] {
        if b[i + 1] - b[i] < 1e-12 {
            b[i] -= 0.5;
            b[i + 1] += 0.5;
        }
    }
    b
}

fn panels_svg(panels: &[Panel], xlabel: &str, cols: usize) -> String {
    let (pw, ph, pad) = (360.0, 220.0, 50.0);
    let rows = panels.len().div_ceil(cols);
    let width = cols as f64 * (pw + pad) + pad;
    let height = rows as f64 * (ph + pad + 20.0) + pad;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        let ox = pad + (i % cols) as f64 * (pw + pad);
        let oy = pad + (i / cols) as f64 * (ph + pad + 20.0);
        let b = bounds(p.series.iter().flat_map(|(_, pts)| pts.iter().copied()));
        let sx = |x: f64| ox + (x - b[0]) / (b[1] - b[0]) * pw;
        let sy = |y: f64| oy + ph - (y - b[2]) / (b[3] - b[2]) * ph;
        let _ = writeln!(
            s,
            r#"<rect x="{ox}" y="{oy}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{} [{}]</text>"#, ox, oy - 6.0, p.title, p.unit);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#, ox - 4.0, oy + 10.0, b[3]);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#, ox - 4.0, oy + ph, b[2]);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{:.3}</text>"#, ox, oy + ph + 14.0, b[0]);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{:.3} {}</text>"#,
            ox + pw,
            oy + ph + 14.0,
            b[1],
            xlabel
        );
        for (j, (name, pts)) in p.series.iter().enumerate() {
            let color = COLORS[j % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            if p.series.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
                    ox + pw - 80.0,
                    oy + 14.0 + 12.0 * j as f64
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

fn series(t: &[f64], v: impl Iterator<Item = Option<f64>>) -> Vec<(f64, f64)> {
    t.iter().zip(v).filter_map(|(&t, v)| v.map(|v| (t, v))).collect()
}

/// Thrust, gimbal and velocity time histories.
pub fn histories_svg(tab: &TrajectoryTable) -> String {
    let t = &tab.t;
    let panels = [
        Panel {
            title: "thrust",
            unit: "MN",
            series: vec![("T", series(t, tab.thrust.iter().map(|x| x.map(|v| v / 1e6))))],
        },
        Panel {
            title: "gimbal",
            unit: "deg",
            series: vec![
                ("command", series(t, tab.delta_cmd_deg.iter().copied())),
                ("actual", series(t, tab.delta_d_deg.iter().map(|&v| Some(v)))),
            ],
        },
        Panel {
            title: "velocity",
            unit: "m/s",
            series: vec![
                ("u", series(t, tab.u.iter().map(|&v| Some(v)))),
                ("v", series(t, tab.v.iter().map(|&v| Some(v)))),
            ],
        },
    ];
    panels_svg(&panels, "s", 3)
}

/// Path in the vertical plane with body-axis ticks at every node, in
/// reference lengths.
pub fn pose_svg(tab: &TrajectoryTable, l_ref: f64) -> String {
    let pts: Vec<(f64, f64)> = tab.x.iter().zip(&tab.y).map(|(x, y)| (x / l_ref, y / l_ref)).collect();
    let b = bounds(pts.iter().copied());
    // Equal axis scaling with room for the ticks.
    let span = (b[1] - b[0]).max(b[3] - b[2]) + 2.0;
    let (cx, cy) = ((b[0] + b[1]) / 2.0, (b[2] + b[3]) / 2.0);
    let size = 600.0;
    let sx = |x: f64| 40.0 + (x - cx + span / 2.0) / span * size;
    let sy = |y: f64| 40.0 + size - (y - cy + span / 2.0) / span * size;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        size + 80.0,
        size + 80.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="40" y="24">trajectory (x/L, y/L) with body axis</text>"#);
    let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#999" stroke-dasharray="4 3" points="{}"/>"##,
        path.join(" ")
    );
    for (i, &(x, y)) in pts.iter().enumerate() {
        let th = tab.theta_deg[i].to_radians();
        // Body spans from 0.6 L behind the cg (base) to 0.4 L ahead (nose).
        let (dx, dy) = (th.cos(), th.sin());
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1f77b4" stroke-width="2"/>"##,
            sx(x - 0.5 * dx),
            sy(y - 0.5 * dy),
            sx(x + 0.5 * dx),
            sy(y + 0.5 * dy)
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#d62728"/>"##,
            sx(x + 0.5 * dx),
            sy(y + 0.5 * dy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="40" y="{}">x/L: {:.2} .. {:.2}   y/L: {:.2} .. {:.2}</text>"#,
        size + 70.0,
        b[0],
        b[1],
        b[2],
        b[3]
    );
    s.push_str("</svg>\n");
    s
}

/// Gimbal torque, mass, pitch, pitch rate, angle of attack and reduced
/// frequency `omega L / (2 |v|)`.
pub fn dynamics_svg(tab: &TrajectoryTable, l_ref: f64, engine_arm_m: f64) -> String {
    let t = &tab.t;
    let n = t.len();
    let torque = (0..n).map(|i| tab.thrust[i].map(|th| -th * tab.delta_d_deg[i].to_radians().sin() * engine_arm_m / 1e6));
    let kred = (0..n).map(|i| {
        let sp = tab.u[i].hypot(tab.v[i]);
        (sp > 0.0).then(|| tab.omega[i] * l_ref / (2.0 * sp))
    });
    let panels = [
        Panel {
            title: "gimbal torque",
            unit: "MN m",
            series: vec![("M_T", series(t, torque))],
        },
        Panel {
            title: "mass",
            unit: "t",
            series: vec![("m", series(t, tab.mass.iter().map(|&m| Some(m / 1e3))))],
        },
        Panel {
            title: "pitch",
            unit: "deg",
            series: vec![("theta", series(t, tab.theta_deg.iter().map(|&v| Some(v))))],
        },
        Panel {
            title: "pitch rate",
            unit: "rad/s",
            series: vec![("omega", series(t, tab.omega.iter().map(|&v| Some(v))))],
        },
        Panel {
            title: "angle of attack",
            unit: "deg",
            series: vec![("alpha", series(t, tab.alpha_deg.iter().copied()))],
        },
        Panel {
            title: "reduced frequency",
            unit: "-",
            series: vec![("k", series(t, kred))],
        },
    ];
    panels_svg(&panels, "s", 3)
}
