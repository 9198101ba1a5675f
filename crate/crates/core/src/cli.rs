//! Command-line front end. Exit codes: 0 success, 1 tolerance breach,
//! 2 configuration or input error, 3 numerical abort.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aero::{dataset_to_csv, fit_report, generate_dataset, train_surrogate, AeroModel, TrainerConfig};
use crate::controls::RawControlParams;
use crate::error::{Error, NumericError};
use crate::io::{self, RunManifest};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::rollout::{
    check_against_reference, finite_diff_grad, gradient, loss, relative_mae, simulate, GradientEngine, FD_STEP,
};
use crate::scenario::{nondimensionalize, resolve_scenario, AeroSpec, NondimScenario, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable overriding the scenario seed.
pub const SEED_ENV: &str = "FLIPOPT_SEED";

/// Relative tolerance for engine comparisons (gradients and optimized runs).
pub const ENGINE_MAE_TOL: f64 = 5e-3;

#[derive(Parser, Debug)]
#[command(name = "flipopt", version, about = "Flip-and-landing trajectory optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize thrust and gimbal sequences for a scenario.
    Optimize(OptimizeArgs),
    /// Roll out a controls CSV without optimizing.
    Simulate(SimulateArgs),
    /// Train the aerodynamic surrogate on the stand-in table.
    TrainAero(TrainArgs),
    /// Compare an engine's gradient with central finite differences.
    CheckGrad(CheckGradArgs),
    /// Compare BPTT and adjoint gradients and optimized runs.
    CompareEngines(CompareArgs),
    /// Render SVG plots for a run directory.
    Plot(PlotArgs),
    /// Re-run a command from its manifest and verify its outputs byte-for-byte.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Preset name (case1, case2) or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Number of RK4 steps K (horizon fixed, step size changes).
    #[arg(long)]
    steps: Option<usize>,
    /// Seed; overrides FLIPOPT_SEED and the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Disable aerodynamic forces.
    #[arg(long)]
    no_aero: bool,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    engine: Option<GradientEngine>,
    /// Adam iterations (defaults to the scenario's `opt.n_steps`).
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    controls: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = 36)]
    samples: usize,
    /// Weights JSON path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20_000)]
    epochs: usize,
    /// Also write the training table as CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckGradArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Steps checked, on the scenario's own step size.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "bptt")]
    engine: GradientEngine,
    /// Central-difference step on the raw parameters.
    #[arg(long, default_value_t = FD_STEP)]
    fd_step: f64,
    /// Test hook: perturb one gradient component before comparing.
    #[arg(long, hide = true)]
    corrupt: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 90)]
    k: usize,
    #[arg(long)]
    iterations: Option<usize>,
    /// Directory for the comparison report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Run directory containing trajectory.csv.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<NumericError> for Failure {
    fn from(e: NumericError) -> Self {
        Error::from(e).into()
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.command {
        Command::Optimize(a) => cmd_optimize(&a, &args),
        Command::Simulate(a) => cmd_simulate(&a, &args),
        Command::TrainAero(a) => cmd_train_aero(&a, &args),
        Command::CheckGrad(a) => cmd_check_grad(&a),
        Command::CompareEngines(a) => cmd_compare_engines(&a, &args),
        Command::Plot(a) => cmd_plot(&a),
        Command::Replay(a) => cmd_replay(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_error(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

struct Loaded {
    cfg: ScenarioConfig,
    scn: NondimScenario,
    aero: AeroModel,
}

fn load(a: &ScenarioArgs) -> Result<Loaded, Failure> {
    let mut cfg = resolve_scenario(&a.scenario).map_err(Error::from)?;
    match a.seed {
        Some(seed) => cfg.seed = seed,
        None => {
            if let Some(seed) = env_seed()? {
                cfg.seed = seed;
            }
        }
    }
    if let Some(k) = a.steps {
        cfg.steps = k;
    }
    if a.no_aero {
        cfg.aero = AeroSpec::None;
    }
    cfg.validate().map_err(Error::from)?;
    let scn = nondimensionalize(&cfg);
    let aero = AeroModel::from_spec(&cfg.aero, cfg.seed)?;
    Ok(Loaded { cfg, scn, aero })
}

fn scenario_input(a: &ScenarioArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let p = Path::new(&a.scenario);
    if p.is_file() {
        manifest.add_input(p)?;
    }
    Ok(())
}

fn cmd_optimize(a: &OptimizeArgs, args: &[String]) -> CmdResult {
    let Loaded { mut cfg, scn, aero } = load(&a.scenario)?;
    if let Some(e) = a.engine {
        if e == GradientEngine::FiniteDiff {
            return Err(config_error("--engine must be bptt or adjoint"));
        }
        cfg.opt.grad_engine = e;
    }
    if let Some(n) = a.iterations {
        cfg.opt.n_steps = n;
    }
    cfg.opt.validate().map_err(Error::from)?;
    let out = io::ensure_dir(&a.out)?;
    let quiet = a.quiet;
    let start = Instant::now();
    let result = optimize(&scn, &aero, &cfg.opt, |h| {
        if !quiet {
            eprintln!("step {:>5}  lr {:.3e}  loss {:.6e}", h.step, h.lr, h.loss.total);
        }
    });
    let res = match result {
        Ok(r) => r,
        Err(abort) => {
            #[derive(Serialize)]
            struct Snapshot<'a> {
                error: String,
                step: usize,
                params: &'a RawControlParams,
                adam: &'a crate::optimizer::AdamState,
            }
            io::write_json(
                &out.join("snapshot.json"),
                &Snapshot {
                    error: abort.error.to_string(),
                    step: abort.step,
                    params: &abort.params,
                    adam: &abort.adam,
                },
            )?;
            io::write_history(&out.join("loss_history.csv"), &abort.history)?;
            return Err(Failure {
                code: EXIT_NUMERIC,
                message: format!("{} (state saved to {})", abort.error, out.join("snapshot.json").display()),
            });
        }
    };
    if !res.saturated.is_empty() {
        eprintln!(
            "warning: {} raw parameters beyond |u| > 6 (flat squashing region)",
            res.saturated.len()
        );
    }
    // The recorded trajectory is the rollout of the controls as written.
    let controls = io::canonical_controls(&res.trajectory.controls, &scn)?;
    let traj = simulate(&controls, &scn, &aero)?;
    let l = loss(&traj, &scn, &scn.weights);
    io::write_trajectory(&out.join("trajectory.csv"), &traj, &scn)?;
    io::write_controls(&out.join("controls.csv"), &res.trajectory.controls, &scn)?;
    io::write_history(&out.join("loss_history.csv"), &res.history)?;
    io::write_json(&out.join("scenario.json"), &cfg)?;
    let summary = io::summarize(
        "optimize",
        &cfg,
        &scn,
        &traj,
        &l,
        Some(cfg.opt.grad_engine),
        Some(res.best_step),
        Some(cfg.opt.n_steps),
        res.saturated.clone(),
        start.elapsed().as_secs_f64(),
    );
    io::write_json(&out.join("summary.json"), &summary)?;
    let mut manifest = RunManifest::new(args, "optimize", Some(&cfg));
    scenario_input(&a.scenario, &mut manifest)?;
    manifest.add_outputs(&out, &["trajectory.csv", "controls.csv", "loss_history.csv", "scenario.json"])?;
    io::write_json(&out.join("manifest.json"), &manifest)?;
    print_terminal(&summary);
    if summary.terminal.is_finite() {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_NUMERIC,
            message: "terminal residuals are not finite".into(),
        })
    }
}

fn print_terminal(s: &io::Summary) {
    let t = &s.terminal;
    println!(
        "{} [{}]: |dr| = {:.4} m, |dv| = {:.4} m/s, dtheta = {:.4} deg, omega = {:.5} rad/s, min mass = {:.1} kg, flip at y/L = {:.2}",
        s.scenario,
        s.engine.map_or("simulate", |e| e.as_str()),
        t.position_error_m,
        t.velocity_error_mps,
        t.pitch_error_deg,
        t.omega_error_radps,
        s.min_mass_kg,
        s.flip_y_over_l
    );
}

fn cmd_simulate(a: &SimulateArgs, args: &[String]) -> CmdResult {
    let Loaded { cfg, scn, aero } = load(&a.scenario)?;
    let controls = io::read_controls(&a.controls, &scn)?;
    if controls.len() != scn.steps {
        return Err(config_error(format!(
            "{}: {} control rows, scenario has K = {}",
            a.controls.display(),
            controls.len(),
            scn.steps
        )));
    }
    let start = Instant::now();
    let out = io::ensure_dir(&a.out)?;
    let traj = simulate(&controls, &scn, &aero)?;
    let l = loss(&traj, &scn, &scn.weights);
    io::write_trajectory(&out.join("trajectory.csv"), &traj, &scn)?;
    io::write_json(&out.join("scenario.json"), &cfg)?;
    let summary = io::summarize(
        "simulate",
        &cfg,
        &scn,
        &traj,
        &l,
        None,
        None,
        None,
        Vec::new(),
        start.elapsed().as_secs_f64(),
    );
    io::write_json(&out.join("summary.json"), &summary)?;
    let mut manifest = RunManifest::new(args, "simulate", Some(&cfg));
    scenario_input(&a.scenario, &mut manifest)?;
    manifest.add_input(&a.controls)?;
    manifest.add_outputs(&out, &["trajectory.csv", "scenario.json"])?;
    io::write_json(&out.join("manifest.json"), &manifest)?;
    print_terminal(&summary);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FitReport {
    samples: usize,
    seed: u64,
    epochs: usize,
    training_mse: f64,
    max_abs_error_cl: f64,
    max_abs_error_cd: f64,
    max_abs_error_cm: f64,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_train_aero(a: &TrainArgs, args: &[String]) -> CmdResult {
    if a.samples < 4 {
        return Err(config_error(format!("--samples must be at least 4, got {}", a.samples)));
    }
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(7),
    };
    let data = generate_dataset(a.samples)?;
    let hyper = TrainerConfig {
        epochs: a.epochs,
        ..TrainerConfig::default()
    };
    let model = train_surrogate(&data, &hyper, seed)?;
    let worst = fit_report(&model, &data);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::ensure_dir(parent)?;
    }
    std::fs::write(&a.out, model.to_json() + "\n").map_err(|e| Error::io(a.out.display().to_string(), e))?;
    let report = FitReport {
        samples: a.samples,
        seed,
        epochs: a.epochs,
        training_mse: model.meta.training_loss,
        max_abs_error_cl: worst[0],
        max_abs_error_cd: worst[1],
        max_abs_error_cm: worst[2],
    };
    let fit_path = sibling(&a.out, ".fit.json");
    io::write_json(&fit_path, &report)?;
    let mut manifest = RunManifest::new(args, "train-aero", None);
    manifest.seed = seed;
    manifest.outputs.insert(file_name(&a.out), io::sha256_file(&a.out)?);
    if let Some(d) = &a.dataset {
        std::fs::write(d, dataset_to_csv(&data)).map_err(|e| Error::io(d.display().to_string(), e))?;
        manifest.outputs.insert(file_name(d), io::sha256_file(d)?);
    }
    io::write_json(&sibling(&a.out, ".manifest.json"), &manifest)?;
    println!(
        "trained on {} samples (seed {seed}): mse {:.3e}, max |error| CL {:.2e} CD {:.2e} CM {:.2e}",
        a.samples, report.training_mse, worst[0], worst[1], worst[2]
    );
    Ok(EXIT_OK)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Raw parameters drawn uniformly from `[-1.5, 1.5]`.
pub fn random_raw(steps: usize, seed: u64) -> RawControlParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RawControlParams {
        u_thrust: (0..steps).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        u_delta: (0..steps).map(|_| rng.gen_range(-1.5..1.5)).collect(),
    }
}

fn cmd_check_grad(a: &CheckGradArgs) -> CmdResult {
    let Loaded { cfg, scn, aero } = load(&a.scenario)?;
    if a.k == 0 {
        return Err(config_error("--k must be at least 1"));
    }
    if !(a.fd_step > 0.0 && a.fd_step.is_finite()) {
        return Err(config_error("--fd-step must be positive"));
    }
    let scn = scn.with_steps(a.k);
    let raw = random_raw(a.k, cfg.seed);
    let w = &scn.weights;
    let mut g = gradient(a.engine, &raw, &scn, &aero, w, cfg.opt.adjoint_checkpoints)?;
    let fd = finite_diff_grad(&raw, &scn, &aero, w, a.fd_step)?;
    if let Some(i) = a.corrupt {
        let k = a.k;
        match i {
            i if i < k => g.grad_u_thrust[i] = g.grad_u_thrust[i] * 1.01 + 1e-3,
            i if i < 2 * k => g.grad_u_delta[i - k] = g.grad_u_delta[i - k] * 1.01 + 1e-3,
            _ => return Err(config_error(format!("--corrupt index {i} out of range"))),
        }
    }
    let (gf, ff) = (g.flat(), fd.flat());
    let check = check_against_reference(&gf, &ff);
    println!("{:>4} {:>8} {:>22} {:>22} {:>10}", "i", "param", a.engine.as_str(), "finite_diff", "rel_err");
    for i in 0..gf.len() {
        let name = if i < a.k {
            format!("u_T[{i}]")
        } else {
            format!("u_d[{}]", i - a.k)
        };
        let rel = (gf[i] - ff[i]).abs() / ff[i].abs().max(f64::MIN_POSITIVE);
        println!("{i:>4} {name:>8} {:>22.14e} {:>22.14e} {rel:>10.2e}", gf[i], ff[i]);
    }
    println!(
        "loss {:.6e}, {} rollouts for finite differences, worst index {} (rel {:.2e}, abs {:.2e})",
        fd.loss.total, fd.rollouts, check.worst_index, check.worst_rel, check.worst_abs
    );
    if check.passed {
        println!("PASS: {} within rel < 1e-5 (|fd| > 1e-8) / abs < 1e-8", a.engine);
        Ok(EXIT_OK)
    } else {
        let i = check.first_failure.expect("failure index");
        println!(
            "FAIL: component {i}: {} = {:.14e}, finite_diff = {:.14e}",
            a.engine, gf[i], ff[i]
        );
        Ok(EXIT_TOLERANCE)
    }
}

#[derive(Serialize)]
pub struct EngineComparison {
    #[serde(rename = "K")]
    pub steps: usize,
    pub gradient_mae: f64,
    pub thrust_mae: f64,
    pub gimbal_mae: f64,
    pub controls_mae: f64,
    /// Per state field, relative to the BPTT run.
    pub trajectory_mae_fields: Vec<(String, f64)>,
    pub trajectory_mae: f64,
    pub bptt_peak_aux_bytes: usize,
    pub adjoint_peak_aux_bytes: usize,
    pub bptt_loss: f64,
    pub adjoint_loss: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Gradient and independent-optimization comparison of the two engines.
pub fn compare_engines(
    scn: &NondimScenario,
    aero: &AeroModel,
    opt: &OptimizerConfig,
    quiet: bool,
) -> crate::error::Result<EngineComparison> {
    let raw = RawControlParams::initial(scn);
    let w = &scn.weights;
    let gb = gradient(GradientEngine::Bptt, &raw, scn, aero, w, opt.adjoint_checkpoints)?;
    let ga = gradient(GradientEngine::Adjoint, &raw, scn, aero, w, opt.adjoint_checkpoints)?;
    let gradient_mae = relative_mae(&ga.flat(), &gb.flat());
    let run = |engine: GradientEngine| {
        let cfg = OptimizerConfig {
            grad_engine: engine,
            ..opt.clone()
        };
        optimize(scn, aero, &cfg, |h| {
            if !quiet {
                eprintln!("[{engine}] step {:>5}  loss {:.6e}", h.step, h.loss.total);
            }
        })
        .map_err(|a| Error::Numeric(a.error))
    };
    let rb = run(GradientEngine::Bptt)?;
    let ra = run(GradientEngine::Adjoint)?;
    let thrust_mae = relative_mae(&ra.trajectory.controls.thrust, &rb.trajectory.controls.thrust);
    let gimbal_mae = relative_mae(&ra.trajectory.controls.delta, &rb.trajectory.controls.delta);
    let field = |tr: &crate::rollout::Trajectory, i: usize| -> Vec<f64> {
        tr.states.iter().map(|s| s.to_array()[i]).collect()
    };
    let trajectory_mae_fields: Vec<(String, f64)> = crate::dynamics::STATE_FIELDS
        .iter()
        .enumerate()
        .map(|(i, name)| (name.to_string(), relative_mae(&field(&ra.trajectory, i), &field(&rb.trajectory, i))))
        .collect();
    let trajectory_mae = trajectory_mae_fields.iter().map(|f| f.1).fold(0.0, f64::max);
    let controls_mae = thrust_mae.max(gimbal_mae);
    Ok(EngineComparison {
        steps: scn.steps,
        gradient_mae,
        thrust_mae,
        gimbal_mae,
        controls_mae,
        trajectory_mae_fields,
        trajectory_mae,
        bptt_peak_aux_bytes: gb.peak_aux_bytes,
        adjoint_peak_aux_bytes: ga.peak_aux_bytes,
        bptt_loss: rb.loss.total,
        adjoint_loss: ra.loss.total,
        iterations: opt.n_steps,
        tolerance: ENGINE_MAE_TOL,
        passed: gradient_mae < ENGINE_MAE_TOL && controls_mae < ENGINE_MAE_TOL && trajectory_mae < ENGINE_MAE_TOL,
    })
}

fn cmd_compare_engines(a: &CompareArgs, args: &[String]) -> CmdResult {
    let mut sa = a.scenario.clone();
    sa.steps = Some(a.k);
    let Loaded { mut cfg, scn, aero } = load(&sa)?;
    if let Some(n) = a.iterations {
        cfg.opt.n_steps = n;
    }
    cfg.opt.validate().map_err(Error::from)?;
    let report = compare_engines(&scn, &aero, &cfg.opt, a.quiet)?;
    println!(
        "K = {}: gradient MAE {:.3e}, controls MAE {:.3e}, trajectory MAE {:.3e} (tolerance {:.1e})",
        report.steps, report.gradient_mae, report.controls_mae, report.trajectory_mae, ENGINE_MAE_TOL
    );
    println!(
        "peak auxiliary memory: bptt {} B, adjoint {} B",
        report.bptt_peak_aux_bytes, report.adjoint_peak_aux_bytes
    );
    if let Some(out) = &a.out {
        let out = io::ensure_dir(out)?;
        io::write_json(&out.join("compare.json"), &report)?;
        let mut manifest = RunManifest::new(args, "compare-engines", Some(&cfg));
        scenario_input(&a.scenario, &mut manifest)?;
        io::write_json(&out.join("manifest.json"), &manifest)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_TOLERANCE })
}

fn cmd_plot(a: &PlotArgs) -> CmdResult {
    let path = a.run.join("trajectory.csv");
    let tab = io::read_trajectory(&path)?;
    if tab.t.is_empty() {
        return Err(config_error(format!("{}: no trajectory rows", path.display())));
    }
    let snapshot = a.run.join("scenario.json");
    let cfg = if snapshot.is_file() {
        crate::scenario::load_scenario(&snapshot).map_err(Error::from)?
    } else {
        crate::scenario::preset("case1").map_err(Error::from)?
    };
    let l_ref = cfg.refs.length;
    let arm = (1.0 - cfg.vehicle.l_cg_frac) * l_ref;
    let write = |name: &str, svg: String| -> Result<(), Failure> {
        let p = a.run.join(name);
        std::fs::write(&p, svg).map_err(|e| Failure::from(Error::io(p.display().to_string(), e)))
    };
    write("histories.svg", io::histories_svg(&tab))?;
    write("trajectory.svg", io::pose_svg(&tab, l_ref))?;
    write("dynamics.svg", io::dynamics_svg(&tab, l_ref, arm))?;
    let k = (0..tab.t.len())
        .max_by(|&i, &j| tab.omega[i].abs().total_cmp(&tab.omega[j].abs()))
        .unwrap_or(0);
    println!(
        "wrote histories.svg, trajectory.svg, dynamics.svg; flip (peak pitch rate) at t = {:.2} s, y/L = {:.2}",
        tab.t[k],
        tab.y[k] / l_ref
    );
    Ok(EXIT_OK)
}

/// Replaces the value of `--flag` (either `--flag v` or `--flag=v`), or
/// appends it.
fn set_flag(args: &mut Vec<String>, flag: &str, value: &str) {
    let eq = format!("{flag}=");
    for i in 0..args.len() {
        if args[i] == flag && i + 1 < args.len() {
            args[i + 1] = value.to_string();
            return;
        }
        if args[i].starts_with(&eq) {
            args[i] = format!("{eq}{value}");
            return;
        }
    }
    args.push(flag.to_string());
    args.push(value.to_string());
}

fn flag_value(args: &[String], flag: &str) -> Option<String> {
    let eq = format!("{flag}=");
    args.iter().enumerate().find_map(|(i, a)| {
        if a == flag {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix(&eq).map(str::to_string)
        }
    })
}

fn cmd_replay(a: &ReplayArgs) -> CmdResult {
    let m = RunManifest::load(&a.manifest)?;
    for (path, hash) in &m.inputs {
        let p = Path::new(path);
        if p.is_file() && io::sha256_file(p)? != *hash {
            return Err(config_error(format!("input {path} changed since the recorded run")));
        }
    }
    let out = io::ensure_dir(&a.out)?;
    let mut args = m.args.clone();
    if let Some(cfg) = &m.scenario {
        let snap = out.join("replay_scenario.json");
        io::write_json(&snap, cfg)?;
        set_flag(&mut args, "--scenario", &snap.display().to_string());
    }
    let out_value = if m.command == "train-aero" {
        let orig = flag_value(&args, "--out")
            .map(|s| file_name(Path::new(&s)))
            .unwrap_or_else(|| "weights.json".into());
        out.join(orig)
    } else {
        out.clone()
    };
    set_flag(&mut args, "--out", &out_value.display().to_string());
    let dataset = flag_value(&args, "--dataset");
    if let Some(d) = dataset {
        let redirected = out.join(file_name(Path::new(&d)));
        set_flag(&mut args, "--dataset", &redirected.display().to_string());
    }
    set_flag(&mut args, "--seed", &m.seed.to_string());
    if (m.command == "optimize" || m.command == "compare-engines") && !args.iter().any(|x| x == "--quiet") {
        args.push("--quiet".into());
    }
    let mut argv = vec!["flipopt".to_string()];
    argv.extend(args);
    let code = run(argv);
    if code != EXIT_OK {
        return Ok(code);
    }
    let mut mismatched = Vec::new();
    for (name, hash) in &m.outputs {
        let p = out.join(name);
        if io::sha256_file(&p)? != *hash {
            mismatched.push(name.clone());
        }
    }
    if mismatched.is_empty() {
        println!("replay reproduced all {} recorded outputs", m.outputs.len());
        Ok(EXIT_OK)
    } else {
        println!("replay differs in: {}", mismatched.join(", "));
        Ok(EXIT_TOLERANCE)
    }
}
