//! Python bindings: grids, velocity fields, norms, projection, time
//! stepping, kick chains and the experiment runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyAssertionError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pe3d_core::dynamics::{Forcing, Scheme, SimState, SimulationParams, Stepper};
use pe3d_core::experiments::smooth_forcing;
use pe3d_core::io::{self, SnapshotHeader};
use pe3d_core::kick::{run_chain, scaled_to_e2, smooth_random_field, KickConfig};
use pe3d_core::norms::NormReport;
use pe3d_core::projection::{constraint_norm, Projector};
use pe3d_core::{Error, GridSpec, HorizontalField};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Assertion(m) => PyAssertionError::new_err(m),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e @ (Error::Solver { .. } | Error::Divergence { .. }) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Box `[0, l1] x [0, l2] x [-h, 0]` with `n1 x n2 x nz` cells.
#[pyclass(name = "Grid", module = "pe3d", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n1, n2, nz, l1=1.0, l2=1.0, h=1.0))]
    fn new(n1: usize, n2: usize, nz: usize, l1: f64, l2: f64, h: f64) -> PyResult<Self> {
        GridSpec::new(l1, l2, h, n1, n2, nz).map(PyGrid).map_err(to_py)
    }

    #[staticmethod]
    fn cube(n: usize) -> PyResult<Self> {
        GridSpec::cube(n).map(PyGrid).map_err(to_py)
    }

    /// Node counts `(n1 + 1, n2 + 1, nz + 1)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let g = &self.0;
        (g.n1 + 1, g.n2 + 1, g.nz + 1)
    }

    #[getter]
    fn lengths(&self) -> (f64, f64, f64) {
        (self.0.l1, self.0.l2, self.0.h)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64, f64) {
        (self.0.d1(), self.0.d2(), self.0.dz())
    }

    fn __repr__(&self) -> String {
        let g = &self.0;
        format!("Grid(n1={}, n2={}, nz={}, l1={}, l2={}, h={})", g.n1, g.n2, g.nz, g.l1, g.l2, g.h)
    }
}

/// Horizontal velocity `(u1, u2)` on the nodes, flattened x fastest, then
/// y, then z (bottom level first).
#[pyclass(name = "Field", module = "pe3d", skip_from_py_object)]
#[derive(Clone)]
struct PyField(HorizontalField);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, u1: Vec<f64>, u2: Vec<f64>) -> PyResult<Self> {
        HorizontalField::from_components(&grid.0, u1, u2).map(PyField).map_err(to_py)
    }

    #[staticmethod]
    fn zeros(grid: &PyGrid) -> Self {
        PyField(HorizontalField::zeros(&grid.0))
    }

    /// Smooth random field satisfying the boundary conditions and the
    /// constraint. With `e2` given it is scaled to `|v|_V^2 = e2`.
    #[staticmethod]
    #[pyo3(signature = (grid, seed, e2=None))]
    fn random(grid: &PyGrid, seed: u64, e2: Option<f64>) -> PyResult<Self> {
        let v = smooth_random_field(&grid.0, seed).map_err(to_py)?;
        match e2 {
            Some(e) => scaled_to_e2(&v, e).map(PyField).map_err(to_py),
            None => Ok(PyField(v)),
        }
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn u1(&self) -> Vec<f64> {
        self.0.u1.clone()
    }

    #[getter]
    fn u2(&self) -> Vec<f64> {
        self.0.u2.clone()
    }

    /// `H2, E2, J, K, Kbar` as a dict.
    fn norms<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = NormReport::of(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("H2", r.h2)?;
        d.set_item("E2", r.e2)?;
        d.set_item("J", r.j)?;
        d.set_item("K", r.k)?;
        d.set_item("Kbar", r.kbar)?;
        Ok(d)
    }

    /// Norm of the divergence of the vertical integral.
    fn constraint_residual(&self) -> f64 {
        constraint_norm(&self.0)
    }

    fn bc_residual(&self) -> f64 {
        self.0.bc_residual()
    }

    #[pyo3(signature = (rel_tol=1e-10))]
    fn project(&self, rel_tol: f64) -> PyResult<Self> {
        let params = pe3d_core::projection::PoissonSolveParams { rel_tol, max_iter: None };
        let mut p = Projector::new(self.0.grid(), params).map_err(to_py)?;
        let mut v = self.0.clone();
        p.project(&mut v).map_err(to_py)?;
        Ok(PyField(v))
    }

    fn scaled(&self, a: f64) -> Self {
        PyField(self.0.scaled(a))
    }

    fn __add__(&self, other: &PyField) -> PyResult<Self> {
        self.0.check_same(&other.0).map_err(to_py)?;
        Ok(PyField(self.0.add(&other.0)))
    }

    fn __sub__(&self, other: &PyField) -> PyResult<Self> {
        self.0.check_same(&other.0).map_err(to_py)?;
        Ok(PyField(self.0.sub(&other.0)))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __eq__(&self, other: &PyField) -> bool {
        self.0 == other.0
    }

    fn save(&self, path: PathBuf, t: f64) -> PyResult<()> {
        io::write_snapshot(&self.0, &SnapshotHeader::new(self.0.grid(), t), &path).map_err(to_py)
    }

    /// Returns `(field, t)`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<(Self, f64)> {
        let (v, h) = io::read_snapshot(&path).map_err(to_py)?;
        Ok((PyField(v), h.t))
    }
}

/// Time stepper with fixed parameters. `forcing_h2 > 0` adds a smooth
/// constant forcing drawn from `seed`.
#[pyclass(name = "Simulator", module = "pe3d")]
struct PySimulator {
    stepper: Stepper,
}

#[pymethods]
impl PySimulator {
    #[new]
    #[pyo3(signature = (grid, nu=1.0, dt_max=1e-3, cfl=0.4, advection=true, scheme="diffuse_then_project", forcing_h2=0.0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        grid: &PyGrid,
        nu: f64,
        dt_max: f64,
        cfl: f64,
        advection: bool,
        scheme: &str,
        forcing_h2: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let scheme = Scheme::parse(scheme).ok_or_else(|| PyValueError::new_err(format!("unknown scheme {scheme:?}")))?;
        let forcing = if forcing_h2 > 0.0 {
            Forcing::Constant(smooth_forcing(&grid.0, seed, forcing_h2).map_err(to_py)?)
        } else {
            Forcing::Zero
        };
        let params = SimulationParams {
            nu,
            dt_max,
            cfl,
            advection,
            scheme,
            forcing,
            ..SimulationParams::default()
        };
        Ok(PySimulator {
            stepper: Stepper::new(&grid.0, &params).map_err(to_py)?,
        })
    }

    /// One CFL-limited step. Returns `(field, dt, slack)`.
    fn step(&mut self, v: &PyField) -> PyResult<(PyField, f64, f64)> {
        let (s, info) = self.stepper.step(&SimState::new(v.0.clone())).map_err(to_py)?;
        Ok((PyField(s.v), info.dt, info.slack))
    }

    /// Advances by `duration`; returns the final field.
    fn advance(&mut self, py: Python<'_>, v: &PyField, duration: f64) -> PyResult<PyField> {
        let start = SimState::new(v.0.clone());
        let stepper = &mut self.stepper;
        let end = py.detach(|| stepper.advance(start, duration, |_, _| {})).map_err(to_py)?;
        Ok(PyField(end.v))
    }
}

/// Runs a kick chain from `v0`; returns the trace as a list of dicts.
#[pyfunction]
#[pyo3(signature = (v0, t_kick, r, n_steps, seed=0, burn_in=0, dt_max=1e-3))]
#[allow(clippy::too_many_arguments)]
fn kick_chain<'py>(
    py: Python<'py>,
    v0: &PyField,
    t_kick: f64,
    r: f64,
    n_steps: usize,
    seed: u64,
    burn_in: usize,
    dt_max: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = KickConfig {
        t_kick,
        r,
        n_steps,
        seed,
        burn_in,
        ..KickConfig::default()
    };
    let params = SimulationParams {
        dt_max,
        ..SimulationParams::default()
    };
    let v = v0.0.clone();
    let run = py.detach(|| run_chain(&cfg, &params, &v)).map_err(to_py)?;
    run.trace
        .iter()
        .map(|rec| {
            let d = PyDict::new(py);
            d.set_item("n", rec.n)?;
            d.set_item("H2", rec.h2)?;
            d.set_item("E2", rec.e2)?;
            d.set_item("J", rec.j)?;
            d.set_item("K", rec.k)?;
            d.set_item("kick_V2", rec.kick_v2)?;
            d.set_item("rescaled", rec.rescaled)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
fn wasserstein1(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    pe3d_core::measure::wasserstein1(&a, &b).map_err(to_py)
}

/// Parses and validates config text; returns it as a dict.
#[pyfunction]
fn parse_config(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let cfg = io::parse_config(text).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&cfg).map_err(|e| to_py(e.into()))?)
}

/// Runs the experiment selected by the config text. Returns the run
/// summary; a failed check raises `AssertionError`.
#[pyfunction]
#[pyo3(signature = (text, output_dir=None, seed=None))]
fn run_experiment(py: Python<'_>, text: &str, output_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let mut cfg = io::parse_config(text).map_err(to_py)?;
    if let Some(o) = output_dir {
        cfg.output_dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let summary = py.detach(|| io::run_experiment(&cfg)).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&summary).map_err(|e| to_py(e.into()))?)
}

#[pymodule]
fn pe3d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(kick_chain, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
