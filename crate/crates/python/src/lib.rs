//! Python bindings: states, controllers, CLFs, verification reports, and the
//! simulator, plus the command-line entry point.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use ppclf_core::clf::{self, ClfId, Pairing};
use ppclf_core::controllers::{control, ControllerSpec};
use ppclf_core::dynamics::{log_vector_field, vector_field, LogState, ModelId, PopulationState};
use ppclf_core::simulator::{integrate, IntegratorConfig};
use ppclf_core::verifier::{
    consistency_sweep, nonstrict_witness, ray_unboundedness_probe, scan_positive_definite,
    scan_vdot_negative, scan_vdot_nonpositive, uniform_rays, DomainGrid, VerificationReport,
};

fn err(e: ppclf_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn state(x: f64, y: f64) -> PyResult<PopulationState> {
    PopulationState::new(x, y).map_err(err)
}

fn model(name: &str) -> PyResult<ModelId> {
    name.parse().map_err(err)
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => py.None().into_bound_py_any(py),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for item in a {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_bound_py_any(py)
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, item) in o {
                d.set_item(k, json_to_py(py, item)?)?;
            }
            d.into_bound_py_any(py)
        }
    }
}

/// A point `(X, Y)` of the open positive quadrant.
#[pyclass(name = "State", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyState(PopulationState);

#[pymethods]
impl PyState {
    #[new]
    fn new(x: f64, y: f64) -> PyResult<Self> {
        Ok(Self(state(x, y)?))
    }

    #[getter]
    fn prey(&self) -> f64 {
        self.0.prey()
    }

    #[getter]
    fn predator(&self) -> f64 {
        self.0.predator()
    }

    /// `(ln X, ln Y)`.
    fn log(&self) -> (f64, f64) {
        let l = self.0.to_log();
        (l.x, l.y)
    }

    fn distance_to_equilibrium(&self) -> f64 {
        self.0.distance_to_equilibrium()
    }

    fn __repr__(&self) -> String {
        format!("State({}, {})", self.0.prey(), self.0.predator())
    }
}

/// A harvesting law, built from its name and optional `eps` / `u0`.
#[pyclass(name = "Controller", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyController(ControllerSpec);

#[pymethods]
impl PyController {
    #[new]
    #[pyo3(signature = (name, eps=None, u0=None))]
    fn new(name: &str, eps: Option<f64>, u0: Option<f64>) -> PyResult<Self> {
        ControllerSpec::from_name(name, eps, u0)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn __call__(&self, x: f64, y: f64) -> PyResult<f64> {
        Ok(control(self.0, state(x, y)?))
    }

    fn targets(&self) -> Vec<&'static str> {
        self.0.targets().iter().map(|m| m.name()).collect()
    }

    fn is_positive_valued(&self) -> bool {
        self.0.is_positive_valued()
    }

    fn __repr__(&self) -> String {
        format!("Controller('{}')", self.0)
    }
}

/// A catalog Lyapunov candidate such as `V_SF_STRICT` or `V1_BOTH`.
#[pyclass(name = "Clf", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyClf(ClfId);

#[pymethods]
impl PyClf {
    #[new]
    #[pyo3(signature = (name, eps=None))]
    fn new(name: &str, eps: Option<f64>) -> PyResult<Self> {
        ClfId::from_name(name, eps).map(Self).map_err(err)
    }

    #[staticmethod]
    fn catalog(eps: f64) -> PyResult<Vec<Self>> {
        let e = ppclf_core::Epsilon::new(eps).map_err(err)?;
        Ok(ClfId::catalog(e).into_iter().map(Self).collect())
    }

    #[getter]
    fn name(&self) -> String {
        self.0.to_string()
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.0.model().name()
    }

    fn is_strict(&self) -> bool {
        self.0.is_strict()
    }

    fn value(&self, x: f64, y: f64) -> PyResult<f64> {
        Ok(clf::value(self.0, state(x, y)?))
    }

    fn gradient(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        Ok(clf::gradient(self.0, state(x, y)?))
    }

    fn designated_controllers(&self) -> Vec<PyController> {
        self.0
            .designated_controllers()
            .into_iter()
            .map(PyController)
            .collect()
    }

    /// Derivative along the model under the fixed input `u`.
    fn lie_derivative(&self, model_name: &str, x: f64, y: f64, u: f64) -> PyResult<f64> {
        clf::lie_derivative(self.0, model(model_name)?, state(x, y)?, u).map_err(err)
    }

    /// Closed-form derivative along the designated closed loop.
    fn closed_form_vdot(&self, controller: &PyController, x: f64, y: f64) -> PyResult<f64> {
        let p = Pairing::new(self.0, controller.0).map_err(err)?;
        Ok(clf::closed_form_vdot(p, state(x, y)?))
    }

    fn __repr__(&self) -> String {
        format!("Clf('{}')", self.0)
    }
}

/// Outcome of one certification check.
#[pyclass(name = "Report", frozen)]
struct PyReport(VerificationReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn check(&self) -> &str {
        &self.0.check
    }

    #[getter]
    fn verdict(&self) -> &'static str {
        if self.0.passed() {
            "pass"
        } else {
            "fail"
        }
    }

    #[getter]
    fn passed(&self) -> bool {
        self.0.passed()
    }

    #[getter]
    fn worst_point(&self) -> (f64, f64) {
        (self.0.worst_point[0], self.0.worst_point[1])
    }

    #[getter]
    fn margin(&self) -> f64 {
        self.0.margin
    }

    #[getter]
    fn points(&self) -> usize {
        self.0.points
    }

    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let v = serde_json::to_value(&self.0.params)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        json_to_py(py, &v)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __repr__(&self) -> String {
        self.0.to_string()
    }
}

#[pyfunction]
fn vector_field_at(model_name: &str, x: f64, y: f64, u: f64) -> PyResult<(f64, f64)> {
    let d = vector_field(model(model_name)?, state(x, y)?, u).map_err(err)?;
    Ok((d.d_prey, d.d_predator))
}

#[pyfunction]
fn log_vector_field_at(model_name: &str, lx: f64, ly: f64, u: f64) -> PyResult<(f64, f64)> {
    let ls = LogState::new(lx, ly).map_err(err)?;
    log_vector_field(model(model_name)?, ls, u).map_err(err)
}

/// Integrates a closed loop; returns a dict of equal-length lists
/// `t, X, Y, U` plus one list per requested CLF, and the CSV text.
#[pyfunction]
#[pyo3(signature = (model_name, controller, x0, y0, t_end=50.0, tol=1e-8, samples=501, clfs=None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    model_name: &str,
    controller: &PyController,
    x0: f64,
    y0: f64,
    t_end: f64,
    tol: f64,
    samples: usize,
    clfs: Option<Vec<PyRef<'py, PyClf>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = IntegratorConfig {
        samples,
        ..IntegratorConfig::with_tolerance(t_end, tol)
    };
    let mut tr = integrate(model(model_name)?, controller.0, state(x0, y0)?, &cfg).map_err(err)?;
    for c in clfs.unwrap_or_default() {
        tr = tr.with_clf(c.0);
    }
    let d = PyDict::new(py);
    d.set_item("t", tr.times.clone())?;
    d.set_item("X", tr.states.iter().map(|s| s.prey()).collect::<Vec<_>>())?;
    d.set_item(
        "Y",
        tr.states.iter().map(|s| s.predator()).collect::<Vec<_>>(),
    )?;
    d.set_item("U", tr.inputs.clone())?;
    for (id, series) in &tr.clf_values {
        d.set_item(id.to_string(), series.clone())?;
    }
    d.set_item("csv", tr.to_csv())?;
    Ok(d)
}

/// Grid certification of a candidate with each designated controller (or
/// the one given).
#[pyfunction]
#[pyo3(signature = (clf_id, controller=None, grid_a=3.0, grid_n=200, strict=false))]
fn verify(
    clf_id: &PyClf,
    controller: Option<&PyController>,
    grid_a: f64,
    grid_n: usize,
    strict: bool,
) -> PyResult<Vec<PyReport>> {
    let grid = DomainGrid::new(grid_a, grid_n).map_err(err)?;
    let id = clf_id.0;
    let ctrls = match controller {
        Some(c) => vec![c.0],
        None => id.designated_controllers(),
    };
    let mut out = vec![
        PyReport(scan_positive_definite(id, &grid)),
        PyReport(ray_unboundedness_probe(id, &uniform_rays(16), 60)),
    ];
    for c in ctrls {
        let p = Pairing::new(id, c).map_err(err)?;
        let r = if id.is_strict() || strict {
            scan_vdot_negative(id, p.model(), c, &grid)
        } else {
            scan_vdot_nonpositive(id, p.model(), c, &grid)
        };
        out.push(PyReport(r.map_err(err)?));
        if !id.is_strict() {
            let w = nonstrict_witness(id, p.model(), c).map_err(err)?;
            out.push(PyReport(VerificationReport::new(
                "nonstrict_witness",
                true,
                w,
                0.0,
                1,
            )));
        }
    }
    Ok(out)
}

/// Summary followed by every identity check of the catalog sweep.
#[pyfunction]
#[pyo3(signature = (grid_a=3.0, grid_n=50))]
fn sweep(grid_a: f64, grid_n: usize) -> PyResult<Vec<PyReport>> {
    let grid = DomainGrid::new(grid_a, grid_n).map_err(err)?;
    let r = consistency_sweep(&grid);
    Ok(std::iter::once(r.summary)
        .chain(r.checks)
        .map(PyReport)
        .collect())
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    ppclf_core::cli::run(std::iter::once("ppclf".to_string()).chain(args))
}

#[pymodule]
fn ppclf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyController>()?;
    m.add_class::<PyClf>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(vector_field_at, m)?)?;
    m.add_function(wrap_pyfunction!(log_vector_field_at, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
