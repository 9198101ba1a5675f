//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.
//! Run with `cargo test --release -p flipopt --test acceptance`.

use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flipopt::aero::{fit_report, generate_dataset, mlp_forward, AeroModel, MlpSurrogate};
use flipopt::cli::{compare_engines, random_raw};
use flipopt::controls::{reparameterize, RawControlParams};
use flipopt::dynamics::{rk4_step, ControlInput, VehicleState};
use flipopt::io::{canonical_controls, terminal_report};
use flipopt::optimizer::optimize;
use flipopt::rollout::{
    check_against_reference, finite_diff_grad, grad_adjoint, grad_bptt, loss, simulate, FD_STEP,
};
use flipopt::scenario::{nondimensionalize, preset, ScenarioConfig};
use flipopt::NondimScenario;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Preset {
    cfg: ScenarioConfig,
    scn: NondimScenario,
    aero: AeroModel,
}

fn load(name: &str) -> Preset {
    let cfg = preset(name).unwrap();
    let scn = nondimensionalize(&cfg);
    let aero = AeroModel::from_spec(&cfg.aero, cfg.seed).unwrap();
    Preset { cfg, scn, aero }
}

fn gradient_correctness(presets: &[&Preset]) -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    let mut failures = Vec::new();
    for p in presets {
        let scn = p.scn.with_steps(10);
        for seed in 0..5u64 {
            let raw = random_raw(10, seed);
            let w = &scn.weights;
            let g = grad_bptt(&raw, &scn, &p.aero, w).unwrap().flat();
            let fd = finite_diff_grad(&raw, &scn, &p.aero, w, FD_STEP).unwrap().flat();
            let c = check_against_reference(&g, &fd);
            if c.worst_rel > worst.0 {
                worst = (c.worst_rel, format!("{} seed {seed}", p.cfg.name));
            }
            if !c.passed {
                failures.push(format!("{} seed {seed} component {}", p.cfg.name, c.first_failure.unwrap()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 30.0,
        format!(
            "K=10, h=1e-6, 2 aero models x 5 seeds: worst rel {:.2e} ({}), tol 1e-5; {:.1} s (limit 30 s){}",
            worst.0,
            worst.1,
            secs,
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", failures.join(", "))
            }
        ),
    )
}

fn engine_equivalence(case2: &Preset) -> Outcome {
    let start = Instant::now();
    let r = compare_engines(&case2.scn, &case2.aero, &case2.cfg.opt, true).unwrap();
    outcome(
        r.passed,
        format!(
            "case2 K={}: gradient MAE {:.2e}, controls MAE {:.2e}, trajectory MAE {:.2e} (tol 5e-3); {:.0} s",
            r.steps,
            r.gradient_mae,
            r.controls_mae,
            r.trajectory_mae,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn memory_contract(case2: &Preset) -> Outcome {
    let mut cfg180 = case2.cfg.clone();
    cfg180.steps = 180;
    let s90 = &case2.scn;
    let s180 = nondimensionalize(&cfg180);
    let w = &s90.weights;
    let a = &case2.aero;
    let adj = |s: &NondimScenario| grad_adjoint(&RawControlParams::initial(s), s, a, w).unwrap().peak_aux_bytes;
    let bptt = |s: &NondimScenario| grad_bptt(&RawControlParams::initial(s), s, a, w).unwrap().peak_aux_bytes;
    let (a90, a180, b90, b180) = (adj(s90), adj(&s180), bptt(s90), bptt(&s180));
    let ra = a180 as f64 / a90 as f64;
    let rb = b180 as f64 / b90 as f64;
    outcome(
        ra <= 1.25 && rb > 1.8,
        format!(
            "adjoint {a90} -> {a180} B (ratio {ra:.3}, limit 1.25); bptt {b90} -> {b180} B (ratio {rb:.3}, must exceed 1.8)"
        ),
    )
}

fn convergence(p: &Preset) -> Outcome {
    let start = Instant::now();
    let res = match optimize(&p.scn, &p.aero, &p.cfg.opt, |_| {}) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("optimization aborted: {}", e.error)),
    };
    // Judge the trajectory of the controls as written to controls.csv.
    let seq = canonical_controls(&res.trajectory.controls, &p.scn).unwrap();
    let traj = simulate(&seq, &p.scn, &p.aero).unwrap();
    let t = terminal_report(&traj, &p.scn);
    let min_mass = traj.min_mass() * p.scn.refs.mass;
    let m_dry = p.cfg.vehicle.m_dry;
    let pass = t.position_error_m < 1.0
        && t.velocity_error_mps < 0.5
        && t.pitch_error_deg.abs() < 1.0
        && t.omega_error_radps.abs() < 0.01
        && traj.states.iter().all(|s| s.mass >= p.scn.m_dry);
    let (k, y) = flipopt::io::flip_location(&traj);
    outcome(
        pass,
        format!(
            "{} steps: |dr| {:.3} m (<1), |dv| {:.3} m/s (<0.5), |dtheta| {:.3} deg (<1), |omega| {:.4} rad/s (<0.01), min mass {:.0} kg (>= {:.0}); flip at step {k}, y/L {:.2} (informational); loss {:.3e}; {:.0} s",
            p.cfg.opt.n_steps,
            t.position_error_m,
            t.velocity_error_mps,
            t.pitch_error_deg.abs(),
            t.omega_error_radps.abs(),
            min_mass,
            m_dry,
            y,
            loss(&traj, &p.scn, &p.scn.weights).total,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn feasibility(scn: &NondimScenario) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        match rng.gen_range(0..4) {
            0 => rng.gen_range(-3.0..3.0),
            1 => rng.gen_range(-40.0..40.0),
            2 => rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-300.0..300.0)),
            _ => [f64::MAX, -f64::MAX, 0.0, 36.8, -36.8, 19.1, -19.1][rng.gen_range(0..7)],
        }
    };
    let mut violations = 0usize;
    let vectors = 10_000;
    for _ in 0..vectors {
        let raw = RawControlParams {
            u_thrust: (0..scn.steps).map(|_| draw(&mut rng)).collect(),
            u_delta: (0..scn.steps).map(|_| draw(&mut rng)).collect(),
        };
        let c = reparameterize(&raw, scn).unwrap();
        violations += c
            .thrust
            .iter()
            .zip(&c.delta)
            .filter(|(t, d)| !(**t >= scn.thrust_min && **t <= scn.thrust_max && d.abs() <= scn.delta_max))
            .count();
    }
    outcome(
        violations == 0,
        format!("{vectors} vectors x K={}: {violations} controls outside [0.25, 1] T_max or +-10 deg", scn.steps),
    )
}

fn integrator_oracles(case1: &Preset) -> Outcome {
    let base = &case1.scn;
    // Gravity-only projectile.
    let zero = ControlInput { thrust: 0.0, delta: 0.0 };
    let x0 = VehicleState {
        x: 0.3,
        y: 2.0,
        theta: 1.2,
        u: -0.05,
        v: -0.3,
        omega: 0.02,
        mass: base.m_wet,
        delta_d: 0.0,
    };
    let mut s = x0;
    let mut proj = 0.0f64;
    for k in 1..=base.steps {
        s = rk4_step(&s, &zero, &AeroModel::None, base.dt, base).unwrap();
        let t = k as f64 * base.dt;
        let exact = [
            x0.x + x0.u * t,
            x0.y + x0.v * t - 0.5 * base.gravity * t * t,
            x0.theta + x0.omega * t,
            x0.u,
            x0.v - base.gravity * t,
            x0.omega,
        ];
        let got = [s.x, s.y, s.theta, s.u, s.v, s.omega];
        for i in 0..6 {
            proj = proj.max((got[i] - exact[i]).abs() / exact[i].abs().max(1e-300));
        }
    }
    // First-order gimbal lag with a constant command.
    let cmd = ControlInput { thrust: 0.02, delta: 0.15 };
    let dt = base.lag_time / 10.0;
    let mut s = VehicleState { delta_d: -0.1, ..x0 };
    let mut lag = 0.0f64;
    for k in 1..=100 {
        s = rk4_step(&s, &cmd, &AeroModel::None, dt, base).unwrap();
        let exact = 0.15 + (-0.1 - 0.15) * (-(k as f64) * dt / base.lag_time).exp();
        lag = lag.max((s.delta_d - exact).abs());
    }
    // v' = -v^2 realized by the vehicle model: no gravity or thrust, unit
    // mass, body aligned with the wind, drag constant scaled to one.
    let mut quad = base.clone();
    quad.gravity = 0.0;
    let drag = AeroModel::simplified(2.0 / (quad.rho * quad.s_ref), 0.55);
    let err = |k: usize| {
        let dt = 1.0 / k as f64;
        let mut s = VehicleState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
            u: 1.0,
            v: 0.0,
            omega: 0.0,
            mass: 1.0,
            delta_d: 0.0,
        };
        for _ in 0..k {
            s = rk4_step(&s, &zero, &drag, dt, &quad).unwrap();
        }
        (s.u - 0.5).abs()
    };
    let ratio = err(10) / err(20);
    outcome(
        proj <= 1e-12 && lag <= 1e-6 && (14.0..=18.0).contains(&ratio),
        format!(
            "projectile max rel err {proj:.2e} (<=1e-12); lag max err {lag:.2e} at dt=T_d/10 (<=1e-6); RK4 error ratio {ratio:.3} on v'=-v^2 (in [14, 18])"
        ),
    )
}

fn surrogate_fidelity(case2: &Preset) -> Outcome {
    let AeroModel::Surrogate(m) = &case2.aero else {
        return outcome(false, "case2 preset has no surrogate".into());
    };
    let data = generate_dataset(36).unwrap();
    let worst = fit_report(m, &data);
    let periodic = exact_shift_periodic(m);
    outcome(
        worst.iter().all(|&e| e < 0.01) && periodic.0 == 0,
        format!(
            "max abs error CL {:.2e}, CD {:.2e}, CM {:.2e} at 36 angles (<0.01); {} of {} exact-shift angles not bit-periodic",
            worst[0], worst[1], worst[2], periodic.0, periodic.1
        ),
    )
}

/// Angles on a 2^-47 grid, for which `a + 2pi` and `a - 2pi` are exact.
fn exact_shift_periodic(m: &MlpSurrogate) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let n = 10_000;
    let bad = (0..n)
        .filter(|_| {
            let a = (rng.gen_range(0.0..TAU) * 2f64.powi(47)).floor() * 2f64.powi(-47);
            let y = mlp_forward(m, a);
            y != mlp_forward(m, a + TAU) || y != mlp_forward(m, a - TAU)
        })
        .count();
    (bad, n)
}

fn determinism(tmp: &Path) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_flipopt");
    let run = |args: &[&str]| -> i32 {
        Command::new(bin)
            .args(args)
            .env_remove("FLIPOPT_SEED")
            .output()
            .map(|o| o.status.code().unwrap_or(-1))
            .unwrap_or(-1)
    };
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let opt = tmp.join("opt");
    let sim = tmp.join("sim");
    let weights = tmp.join("aero").join("weights.json");
    let mut codes = vec![
        run(&["optimize", "--scenario", "case1", "--iterations", "300", "--quiet", "--out", &s(&opt)]),
        run(&["optimize", "--scenario", "case2", "--steps", "30", "--iterations", "100", "--engine", "adjoint", "--quiet", "--out", &s(&tmp.join("opt2"))]),
    ];
    codes.push(run(&[
        "simulate",
        "--scenario",
        "case1",
        "--controls",
        &s(&opt.join("controls.csv")),
        "--out",
        &s(&sim),
    ]));
    codes.push(run(&[
        "train-aero", "--samples", "36", "--epochs", "2000", "--out", &s(&weights), "--dataset", &s(&tmp.join("aero").join("table.csv")),
    ]));
    if codes.iter().any(|&c| c != 0) {
        return outcome(false, format!("setup runs exited {codes:?}"));
    }
    let manifests = [
        opt.join("manifest.json"),
        tmp.join("opt2").join("manifest.json"),
        sim.join("manifest.json"),
        tmp.join("aero").join("weights.json.manifest.json"),
    ];
    let mut replays = Vec::new();
    for (i, m) in manifests.iter().enumerate() {
        replays.push(run(&["replay", "--manifest", &s(m), "--out", &s(&tmp.join(format!("replay{i}")))]));
    }
    outcome(
        replays.iter().all(|&c| c == 0),
        format!("optimize x2, simulate, train-aero replayed from manifests: exit codes {replays:?} (0 = all recorded outputs byte-identical)"),
    )
}

fn main() {
    // libtest flags (--nocapture, filters) are accepted and ignored.
    let start = Instant::now();
    let case1 = load("case1");
    let case2 = load("case2");
    println!("surrogate trained for case2 in {:.1} s", start.elapsed().as_secs_f64());
    let tmp = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("gradient correctness", Box::new(|| gradient_correctness(&[&case1, &case2]))),
        ("engine equivalence", Box::new(|| engine_equivalence(&case2))),
        ("adjoint memory contract", Box::new(|| memory_contract(&case2))),
        ("case 1 convergence", Box::new(|| convergence(&case1))),
        ("case 2 convergence", Box::new(|| convergence(&case2))),
        ("constraint feasibility", Box::new(|| feasibility(&case1.scn))),
        ("integrator oracles", Box::new(|| integrator_oracles(&case1))),
        ("surrogate fidelity", Box::new(|| surrogate_fidelity(&case2))),
        ("determinism", Box::new(|| determinism(tmp.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {name}: {} | {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
