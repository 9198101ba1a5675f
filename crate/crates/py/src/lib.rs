//! Python bindings: scenarios, rollouts, gradients, optimization and the
//! aerodynamic surrogate.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use flipopt::aero::{self, AeroModel, MlpSurrogate, TrainerConfig};
use flipopt::controls::{reparameterize, ControlSequence, RawControlParams};
use flipopt::io::{self, terminal_report};
use flipopt::optimizer::optimize as run_optimize;
use flipopt::rollout::{self, GradientEngine, Trajectory};
use flipopt::scenario::{nondimensionalize, resolve_scenario, state_to_si, AeroSpec, NondimScenario, ScenarioConfig};
use flipopt::{Error, NumericError};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numeric(n) => PyArithmeticError::new_err(n.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn num_err(e: NumericError) -> PyErr {
    py_err(e.into())
}

fn parse_engine(name: &str) -> PyResult<GradientEngine> {
    name.parse().map_err(PyValueError::new_err)
}

/// A resolved scenario with its aerodynamic model.
#[pyclass(module = "pyflipopt", frozen)]
struct Scenario {
    cfg: ScenarioConfig,
    scn: NondimScenario,
    aero: AeroModel,
}

impl Scenario {
    fn build(cfg: ScenarioConfig) -> PyResult<Self> {
        cfg.validate().map_err(|e| py_err(e.into()))?;
        let scn = nondimensionalize(&cfg);
        let aero = AeroModel::from_spec(&cfg.aero, cfg.seed).map_err(py_err)?;
        Ok(Self { cfg, scn, aero })
    }

    fn raw(&self, u_thrust: Vec<f64>, u_delta: Vec<f64>) -> PyResult<RawControlParams> {
        let raw = RawControlParams { u_thrust, u_delta };
        raw.check(self.scn.steps).map_err(num_err)?;
        Ok(raw)
    }
}

#[pymethods]
impl Scenario {
    /// `spec` is a preset name or a path to a scenario JSON file.
    #[new]
    #[pyo3(signature = (spec, steps=None, seed=None, no_aero=false))]
    fn new(spec: &str, steps: Option<usize>, seed: Option<u64>, no_aero: bool) -> PyResult<Self> {
        let mut cfg = resolve_scenario(spec).map_err(|e| py_err(e.into()))?;
        if let Some(k) = steps {
            cfg.steps = k;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if no_aero {
            cfg.aero = AeroSpec::None;
        }
        Self::build(cfg)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    #[getter]
    fn steps(&self) -> usize {
        self.scn.steps
    }

    #[getter]
    fn dt_s(&self) -> f64 {
        self.scn.dt * self.scn.refs.time()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    #[getter]
    fn aero_kind(&self) -> &'static str {
        self.aero.kind()
    }

    fn to_json(&self) -> String {
        self.cfg.to_json()
    }

    /// Hover-throttle raw parameters `(u_thrust, u_delta)`.
    fn initial_raw(&self) -> (Vec<f64>, Vec<f64>) {
        let r = RawControlParams::initial(&self.scn);
        (r.u_thrust, r.u_delta)
    }

    /// Squashed controls in SI: `(thrust_N, delta_deg)`.
    fn reparameterize(&self, u_thrust: Vec<f64>, u_delta: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let seq = reparameterize(&self.raw(u_thrust, u_delta)?, &self.scn).map_err(num_err)?;
        Ok(controls_si(&seq, &self.scn))
    }

    /// Rolls out SI controls and returns trajectory columns plus loss terms.
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        thrust_n: Vec<f64>,
        delta_deg: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let rows: Vec<(f64, f64)> = thrust_n.into_iter().zip(delta_deg).collect();
        let seq = io::controls_from_rows(&rows, &self.scn).map_err(py_err)?;
        if seq.len() != self.scn.steps {
            return Err(PyValueError::new_err(format!(
                "{} control steps, scenario has K = {}",
                seq.len(),
                self.scn.steps
            )));
        }
        let traj = rollout::simulate(&seq, &self.scn, &self.aero).map_err(num_err)?;
        run_dict(py, self, &traj)
    }

    /// Gradient of the loss with respect to the raw parameters.
    #[pyo3(signature = (u_thrust, u_delta, engine="bptt"))]
    fn gradient<'py>(
        &self,
        py: Python<'py>,
        u_thrust: Vec<f64>,
        u_delta: Vec<f64>,
        engine: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let engine = parse_engine(engine)?;
        let raw = self.raw(u_thrust, u_delta)?;
        let ck = self.cfg.opt.adjoint_checkpoints;
        let g = py
            .detach(|| rollout::gradient(engine, &raw, &self.scn, &self.aero, &self.scn.weights, ck))
            .map_err(num_err)?;
        let d = PyDict::new(py);
        d.set_item("engine", g.engine.as_str())?;
        d.set_item("grad_u_thrust", g.grad_u_thrust)?;
        d.set_item("grad_u_delta", g.grad_u_delta)?;
        d.set_item("loss", g.loss.total)?;
        d.set_item("peak_aux_bytes", g.peak_aux_bytes)?;
        d.set_item("wall_time_s", g.wall_time_s)?;
        Ok(d)
    }

    /// Runs Adam and returns the best iterate's controls and trajectory.
    #[pyo3(signature = (engine=None, iterations=None))]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        engine: Option<&str>,
        iterations: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut opt = self.cfg.opt.clone();
        if let Some(e) = engine {
            opt.grad_engine = parse_engine(e)?;
        }
        if let Some(n) = iterations {
            opt.n_steps = n;
        }
        opt.validate().map_err(|e| py_err(e.into()))?;
        let res = py
            .detach(|| run_optimize(&self.scn, &self.aero, &opt, |_| {}))
            .map_err(|a| num_err(a.error))?;
        let d = run_dict(py, self, &res.trajectory)?;
        d.set_item("best_step", res.best_step)?;
        d.set_item("history", res.history.iter().map(|h| h.loss.total).collect::<Vec<_>>())?;
        d.set_item("saturated", res.saturated)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, K={}, aero={})",
            self.cfg.name,
            self.scn.steps,
            self.aero.kind()
        )
    }
}

fn controls_si(seq: &ControlSequence, scn: &NondimScenario) -> (Vec<f64>, Vec<f64>) {
    (
        seq.thrust.iter().map(|t| t * scn.refs.force()).collect(),
        seq.delta.iter().map(|d| d.to_degrees()).collect(),
    )
}

fn run_dict<'py>(py: Python<'py>, s: &Scenario, traj: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let si: Vec<_> = traj.states.iter().map(|x| state_to_si(x, &s.scn.refs)).collect();
    let d = PyDict::new(py);
    let t_ref = s.scn.refs.time();
    d.set_item("t_s", (0..si.len()).map(|k| s.scn.time_at(k) * t_ref).collect::<Vec<_>>())?;
    d.set_item("x_m", si.iter().map(|x| x.x).collect::<Vec<_>>())?;
    d.set_item("y_m", si.iter().map(|x| x.y).collect::<Vec<_>>())?;
    d.set_item("theta_deg", si.iter().map(|x| x.theta.to_degrees()).collect::<Vec<_>>())?;
    d.set_item("u_mps", si.iter().map(|x| x.u).collect::<Vec<_>>())?;
    d.set_item("v_mps", si.iter().map(|x| x.v).collect::<Vec<_>>())?;
    d.set_item("omega_radps", si.iter().map(|x| x.omega).collect::<Vec<_>>())?;
    d.set_item("mass_kg", si.iter().map(|x| x.mass).collect::<Vec<_>>())?;
    let (thrust, delta) = controls_si(&traj.controls, &s.scn);
    d.set_item("thrust_N", thrust)?;
    d.set_item("delta_deg", delta)?;
    let l = rollout::loss(traj, &s.scn, &s.scn.weights);
    let terms = PyDict::new(py);
    for (name, v) in rollout::LOSS_TERMS.iter().zip(l.terms()) {
        terms.set_item(*name, v)?;
    }
    d.set_item("loss", l.total)?;
    d.set_item("loss_terms", terms)?;
    let t = terminal_report(traj, &s.scn);
    d.set_item("position_error_m", t.position_error_m)?;
    d.set_item("velocity_error_mps", t.velocity_error_mps)?;
    d.set_item("pitch_error_deg", t.pitch_error_deg)?;
    d.set_item("omega_error_radps", t.omega_error_radps)?;
    Ok(d)
}

/// Trained or loaded MLP mapping angle of attack to `(C_L, C_D, C_M)`.
#[pyclass(module = "pyflipopt", frozen)]
struct Surrogate {
    model: MlpSurrogate,
}

#[pymethods]
impl Surrogate {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            model: MlpSurrogate::load(&path).map_err(py_err)?,
        })
    }

    /// `alpha` in radians.
    fn predict(&self, alpha: f64) -> (f64, f64, f64) {
        aero::mlp_forward(&self.model, alpha)
    }

    /// Largest absolute error per coefficient on the stand-in grid.
    fn fit_report(&self, samples: usize) -> PyResult<(f64, f64, f64)> {
        let data = aero::generate_dataset(samples).map_err(py_err)?;
        let w = aero::fit_report(&self.model, &data);
        Ok((w[0], w[1], w[2]))
    }

    #[getter]
    fn training_loss(&self) -> f64 {
        self.model.meta.training_loss
    }

    fn to_json(&self) -> String {
        self.model.to_json()
    }
}

/// Trains the surrogate on `samples` evenly spaced stand-in angles.
#[pyfunction]
#[pyo3(signature = (samples=36, seed=7, epochs=20_000))]
fn train_aero(py: Python<'_>, samples: usize, seed: u64, epochs: usize) -> PyResult<Surrogate> {
    let data = aero::generate_dataset(samples).map_err(py_err)?;
    let cfg = TrainerConfig {
        epochs,
        ..TrainerConfig::default()
    };
    let model = py.detach(|| aero::train_surrogate(&data, &cfg, seed)).map_err(py_err)?;
    Ok(Surrogate { model })
}

/// Stand-in coefficient table `(C_L, C_D, C_M)` at `alpha` radians.
#[pyfunction]
fn standin_coeffs(alpha: f64) -> (f64, f64, f64) {
    aero::standin_coeffs(alpha)
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn cli(args: Vec<String>) -> i32 {
    flipopt::cli::run(std::iter::once("flipopt".to_string()).chain(args))
}

#[pymodule]
pub fn pyflipopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Surrogate>()?;
    m.add_function(wrap_pyfunction!(train_aero, m)?)?;
    m.add_function(wrap_pyfunction!(standin_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
