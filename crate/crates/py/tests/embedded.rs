use pyo3::prelude::*;
use pyo3::types::PyDict;

use pyflipopt::pyflipopt;

#[test]
fn module_runs_inside_an_embedded_interpreter() {
    pyo3::append_to_inittab!(pyflipopt);
    Python::initialize();
    Python::attach(|py| -> PyResult<()> {
        let m = py.import("pyflipopt")?;
        let scn = m.getattr("Scenario")?.call1(("case2", 6))?;
        assert_eq!(scn.getattr("aero_kind")?.extract::<String>()?, "surrogate");
        let (ut, ud): (Vec<f64>, Vec<f64>) = scn.call_method0("initial_raw")?.extract()?;
        let kwargs = PyDict::new(py);
        kwargs.set_item("engine", "adjoint")?;
        let g = scn.call_method("gradient", (ut.clone(), ud.clone()), Some(&kwargs))?;
        let b = scn.call_method1("gradient", (ut, ud))?;
        let ga: Vec<f64> = g.get_item("grad_u_delta")?.extract()?;
        let gb: Vec<f64> = b.get_item("grad_u_delta")?.extract()?;
        for (a, b) in ga.iter().zip(&gb) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-12));
        }
        let err = scn.call_method1("simulate", (vec![1e6; 5], vec![0.0; 5])).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let coeffs: (f64, f64, f64) = m.getattr("standin_coeffs")?.call1((0.0,))?.extract()?;
        assert_eq!(coeffs.0, 0.0);
        Ok(())
    })
    .unwrap();
}
