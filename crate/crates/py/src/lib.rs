//! Python module `nonlocal_fb`: kernels, the Dirichlet and obstacle
//! solvers, half-line profiles and the exponent tools.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nonlocal_fb::analysis::fit_growth as fit_growth_rs;
use nonlocal_fb::dirichlet::solve_dirichlet as solve_dirichlet_rs;
use nonlocal_fb::halfspace::build_halfspace_truncated_with;
use nonlocal_fb::kernels::KernelSpec;
use nonlocal_fb::mesh::{Exterior, Grid, GridFunction, Region};
use nonlocal_fb::nonlocal_op::beta0 as beta0_rs;
use nonlocal_fb::obstacle::{solve_obstacle as solve_obstacle_rs, ObstacleProblem};
use nonlocal_fb::onephase::min_max_identity as min_max_identity_rs;

fn err(e: nonlocal_fb::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A translation invariant kernel in dimension `n` of order `s`.
#[pyclass(frozen, skip_from_py_object, name = "Kernel", module = "nonlocal_fb")]
#[derive(Clone)]
pub struct Kernel(pub KernelSpec);

#[pymethods]
impl Kernel {
    #[staticmethod]
    #[pyo3(signature = (s, n = 1))]
    fn fractional_laplacian(s: f64, n: usize) -> PyResult<Self> {
        KernelSpec::fractional_laplacian(n, s).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (s, coeff = 1.0, n = 1))]
    fn power(s: f64, coeff: f64, n: usize) -> PyResult<Self> {
        KernelSpec::power_kernel(n, s, coeff).map(Self).map_err(err)
    }

    /// Envelope `[lam, cap]` modulated by `cos(log_frequency ln r)`.
    #[staticmethod]
    #[pyo3(signature = (s, lam = 1.0, cap = 2.0, log_frequency = None, n = 1))]
    fn oscillating(s: f64, lam: f64, cap: f64, log_frequency: Option<f64>, n: usize) -> PyResult<Self> {
        let w = log_frequency.unwrap_or(2.0 * std::f64::consts::PI / std::f64::consts::LN_2);
        KernelSpec::oscillating(n, s, lam, cap, w).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (s, lam = 1.0, cap = 2.0, n = 1))]
    fn dyadic_piecewise(s: f64, lam: f64, cap: f64, n: usize) -> PyResult<Self> {
        KernelSpec::dyadic_piecewise(n, s, lam, cap).map(Self).map_err(err)
    }

    #[getter]
    fn order(&self) -> f64 {
        self.0.order()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn density(&self, h: Vec<f64>) -> PyResult<f64> {
        if h.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("expected a point in dimension {}", self.0.dim())));
        }
        Ok(self.0.density(&h))
    }

    /// `K_r(h) = r^{n+2s} K(r h)`.
    fn rescale(&self, r: f64) -> PyResult<Self> {
        self.0.rescale(r).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, n={}, s={})", self.0.family(), self.0.dim(), self.0.order())
    }
}

/// Solves `L u = source` on `(a, b)` with `u = 0` elsewhere on the uniform
/// grid `(lo, hi, nodes)`.  Returns `(x, u)`.
#[pyfunction]
#[pyo3(signature = (kernel, a, b, lo, hi, nodes, source = 1.0))]
fn solve_dirichlet(kernel: &Kernel, a: f64, b: f64, lo: f64, hi: f64, nodes: usize, source: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let grid = Grid::uniform(lo, hi, nodes).map_err(err)?;
    let omega = Region::interval(&grid, a, b, false).map_err(err)?;
    let f = GridFunction::from_fn(grid.clone(), Exterior::zero(), |_| source).map_err(err)?;
    let g = GridFunction::from_fn(grid.clone(), Exterior::zero(), |_| 0.0).map_err(err)?;
    let u = solve_dirichlet_rs(&kernel.0, &omega, &f, &g).map_err(err)?;
    Ok((grid.coords(), u.values))
}

/// `(x, u, free_boundary, residual)`
type ObstacleOut = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

/// Obstacle problem with obstacle `height (1 - (x / width)^2)_+^2` in
/// `(-radius, radius)`.  Returns `(x, u, free_boundary, residual)`.
#[pyfunction]
#[pyo3(signature = (kernel, radius, nodes, height = 1.0, width = 0.5))]
fn solve_obstacle(kernel: &Kernel, radius: f64, nodes: usize, height: f64, width: f64) -> PyResult<ObstacleOut> {
    if width.is_nan() || width <= 0.0 {
        return Err(PyValueError::new_err("width must be positive"));
    }
    let p = ObstacleProblem::from_fn(kernel.0.clone(), radius, nodes, |x| height * (1.0 - (x / width).powi(2)).max(0.0).powi(2))
        .map_err(err)?;
    let r = solve_obstacle_rs(&p).map_err(err)?;
    let fb = r.free_boundary.iter().map(|q| q.x).collect();
    Ok((r.u.grid.coords(), r.u.values.clone(), fb, r.residual))
}

/// Values at `xs` of the half-line solution built in `(-truncation, truncation)`.
#[pyfunction]
#[pyo3(signature = (kernel, xs, truncation = 8.0, nodes_per_unit = 64))]
fn halfspace_profile(kernel: &Kernel, xs: Vec<f64>, truncation: f64, nodes_per_unit: usize) -> PyResult<Vec<f64>> {
    let b = build_halfspace_truncated_with(&kernel.0, truncation, nodes_per_unit).map_err(err)?;
    Ok(xs.into_iter().map(|x| b.value(x)).collect())
}

/// Exponent annihilated by the extremal operator of the envelope `[lam, cap]`.
#[pyfunction]
#[pyo3(signature = (lam, cap, s, tol = 1e-8, margin = 1e-3))]
fn beta0(lam: f64, cap: f64, s: f64, tol: f64, margin: f64) -> PyResult<f64> {
    beta0_rs(lam, cap, s, tol, margin).map(|b| b.beta0).map_err(err)
}

/// Log-log fit of `(r, value)` pairs.  Returns `(exponent, coefficient, r_squared)`.
#[pyfunction]
fn fit_growth(samples: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = fit_growth_rs(&samples).map_err(err)?;
    Ok((f.exponent, f.coefficient, f.r_squared))
}

/// Both sides of the lattice identity for `max`/`min` of two pairs.
#[pyfunction]
fn min_max_identity(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    min_max_identity_rs(a, b, c, d)
}

#[pymodule]
#[pyo3(name = "nonlocal_fb")]
pub fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", nonlocal_fb::VERSION)?;
    m.add_class::<Kernel>()?;
    m.add_function(wrap_pyfunction!(solve_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(solve_obstacle, m)?)?;
    m.add_function(wrap_pyfunction!(halfspace_profile, m)?)?;
    m.add_function(wrap_pyfunction!(beta0, m)?)?;
    m.add_function(wrap_pyfunction!(fit_growth, m)?)?;
    m.add_function(wrap_pyfunction!(min_max_identity, m)?)?;
    Ok(())
}
