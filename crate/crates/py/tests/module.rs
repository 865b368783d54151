use pyo3::prelude::*;
use pyo3::types::PyModule;

use nonlocal_fb_py::py_module;

fn with_module(f: impl FnOnce(&Bound<'_, PyModule>) -> PyResult<()>) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "nonlocal_fb")?;
        py_module(&m)?;
        f(&m)
    })
    .unwrap();
}

#[test]
fn exposes_the_library_version() {
    with_module(|m| {
        let v: String = m.getattr("__version__")?.extract()?;
        assert_eq!(v, nonlocal_fb::VERSION);
        Ok(())
    });
}

#[test]
fn beta0_and_identity_round_trip() {
    with_module(|m| {
        let b: f64 = m.getattr("beta0")?.call1((1.0, 1.0, 0.3))?.extract()?;
        assert!((b - 0.3).abs() < 1e-2);
        let pair: (f64, f64) = m.getattr("min_max_identity")?.call1((3.0, 1.0, 0.0, 2.0))?.extract()?;
        assert_eq!(pair, (2.0, 2.0));
        Ok(())
    });
}

#[test]
fn invalid_order_raises_value_error() {
    with_module(|m| {
        let kernel = m.getattr("Kernel")?;
        let err = kernel.call_method1("fractional_laplacian", (1.5,)).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
        Ok(())
    });
}

#[test]
fn dirichlet_solution_is_positive_inside() {
    with_module(|m| {
        let kernel = m.getattr("Kernel")?.call_method1("oscillating", (0.5,))?;
        let (x, u): (Vec<f64>, Vec<f64>) = m.getattr("solve_dirichlet")?.call1((kernel, 0.0, 1.0, -0.5, 1.5, 201))?.extract()?;
        assert_eq!(x.len(), 201);
        for (xi, ui) in x.iter().zip(&u) {
            if *xi > 0.01 && *xi < 0.99 {
                assert!(*ui > 0.0);
            } else if *xi < 0.0 || *xi > 1.0 {
                assert_eq!(*ui, 0.0);
            }
        }
        Ok(())
    });
}
