//! Python bindings. Results come back as plain dicts and lists.

use std::cell::RefCell;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use todp_core::bo::{run_bo as core_run_bo, BoConfig, DropoutMode};
use todp_core::experiment::{self, ExperimentConfig, Mode};
use todp_core::mfd::{self, NetworkParams};
use todp_core::population::{build_population as core_build_population, PopulationConfig};
use todp_core::toll::{GaussianComponent, TollBounds, TollProfile};
use todp_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e @ (Error::Stall { .. } | Error::Numerical(_) | Error::Misuse(_)) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn from_json<'py>(py: Python<'py>, s: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (s,))
}

/// Gaussian-mixture toll rate over the morning, DKK per km.
#[pyclass(name = "TollProfile")]
struct PyToll {
    inner: TollProfile,
}

#[pymethods]
impl PyToll {
    /// `components` is a list of `(amplitude, mean, width)` triples.
    #[new]
    fn new(components: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let cs = components
            .into_iter()
            .map(|(a, m, w)| GaussianComponent::new(a, m, w))
            .collect::<Result<Vec<_>, _>>()
            .map_err(py_err)?;
        Ok(Self { inner: TollProfile::new(cs).map_err(py_err)? })
    }

    /// Decodes a flat `[A1, xi1, sigma1, ...]` vector checked against the default bounds.
    #[staticmethod]
    fn from_vector(v: Vec<f64>, k: usize) -> PyResult<Self> {
        Ok(Self { inner: TollProfile::from_vector(&v, k, &TollBounds::default()).map_err(py_err)? })
    }

    fn eval(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    fn to_vector(&self) -> Vec<f64> {
        self.inner.to_vector()
    }

    fn components(&self) -> Vec<(f64, f64, f64)> {
        self.inner.components().iter().map(|c| (c.amplitude, c.mean, c.width)).collect()
    }

    fn __repr__(&self) -> String {
        format!("TollProfile({:?})", self.components())
    }
}

/// A parsed experiment configuration.
#[pyclass(name = "Experiment")]
struct PyExperiment {
    cfg: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    /// Parses a TOML config. An empty string gives the no-toll defaults.
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        let cfg = ExperimentConfig::from_toml_str(toml).map_err(py_err)?;
        cfg.mode().map_err(py_err)?;
        Ok(Self { cfg })
    }

    #[getter]
    fn mode(&self) -> PyResult<&'static str> {
        Ok(self.cfg.mode().map_err(py_err)?.name())
    }

    fn set_seed(&mut self, seed: u64) {
        self.cfg.set_seed(seed);
    }

    /// The effective config with every default filled in.
    fn to_toml(&self) -> PyResult<String> {
        let mut c = self.cfg.clone();
        if c.mode().map_err(py_err)? == Mode::Optimize {
            c.resolve_for(Mode::Optimize).map_err(py_err)?;
        }
        c.to_toml_string().map_err(py_err)
    }

    /// Runs the experiment, writes its files under `out_dir` and returns the summary.
    fn run<'py>(&self, py: Python<'py>, out_dir: &str) -> PyResult<Bound<'py, PyAny>> {
        let mut c = self.cfg.clone();
        c.resolve_for(c.mode().map_err(py_err)?).map_err(py_err)?;
        c.experiment.output_dir = out_dir.into();
        let outcome = py.detach(|| experiment::run(&c)).map_err(py_err)?;
        let s = serde_json::to_string(&outcome.summary).map_err(json_err)?;
        let d = from_json(py, &s)?;
        d.set_item("all_converged", outcome.all_converged)?;
        Ok(d)
    }

    /// Equilibrium under `toll` (or no toll) without writing files.
    #[pyo3(signature = (toll = None))]
    fn equilibrium<'py>(&self, py: Python<'py>, toll: Option<PyRef<'py, PyToll>>) -> PyResult<Bound<'py, PyAny>> {
        let c = self.cfg.clone();
        let toll = toll.map(|t| t.inner.clone());
        let scenario = py
            .detach(|| {
                let pop = core_build_population(&c.population)?;
                experiment::evaluate_scenario(&c, 0, pop, toll.as_ref())
            })
            .map_err(py_err)?;
        from_json(py, &serde_json::to_string(&scenario.summary).map_err(json_err)?)
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// MFD speed in m/min at accumulation `n`.
#[pyfunction]
#[pyo3(signature = (n, n_jam = 4500.0, v_f = 9.78))]
fn speed(n: f64, n_jam: f64, v_f: f64) -> f64 {
    mfd::speed(n, &NetworkParams { n_jam, v_f })
}

/// Simulates one day. Returns travel times, the accumulation trajectory and its peak.
#[pyfunction]
fn simulate_day<'py>(py: Python<'py>, departures: Vec<f64>, lengths: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = mfd::simulate_day(&departures, &lengths, &NetworkParams::default()).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("travel_times", r.travel_times)?;
    d.set_item("times", r.trajectory.iter().map(|p| p.time).collect::<Vec<_>>())?;
    d.set_item("accumulation", r.trajectory.iter().map(|p| p.accumulation).collect::<Vec<_>>())?;
    d.set_item("peak_accumulation", r.peak_accumulation)?;
    Ok(d)
}

/// Synthesises a population with default parameters. Returns columns.
#[pyfunction]
#[pyo3(signature = (n_travelers = 3700, seed = 42))]
fn build_population<'py>(py: Python<'py>, n_travelers: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PopulationConfig { n_travelers, seed, ..Default::default() };
    let pop = core_build_population(&cfg).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("id", pop.iter().map(|p| p.id).collect::<Vec<_>>())?;
    d.set_item("L", pop.iter().map(|p| p.trip_length).collect::<Vec<_>>())?;
    d.set_item("theta", pop.iter().map(|p| p.value_of_time).collect::<Vec<_>>())?;
    d.set_item("sde", pop.iter().map(|p| p.sde).collect::<Vec<_>>())?;
    d.set_item("sdl", pop.iter().map(|p| p.sdl).collect::<Vec<_>>())?;
    d.set_item("t_star", pop.iter().map(|p| p.desired_arrival).collect::<Vec<_>>())?;
    Ok(d)
}

/// Maximises a Python callable `f(x) -> float` over the box `bounds`.
/// `dropout` is `None`, `("random", d)`, `("by_parameter", d)` or `("by_component", d)`.
#[pyfunction]
#[pyo3(signature = (f, bounds, n_init = 30, budget = 90, seed = 42, dropout = None))]
fn run_bo<'py>(
    py: Python<'py>,
    f: Bound<'py, PyAny>,
    bounds: Vec<(f64, f64)>,
    n_init: usize,
    budget: usize,
    seed: u64,
    dropout: Option<(String, usize)>,
) -> PyResult<Bound<'py, PyDict>> {
    let dropout = match dropout {
        None => DropoutMode::None,
        Some((m, d)) => match m.as_str() {
            "random" => DropoutMode::Random { d },
            "by_parameter" => DropoutMode::ByParameter { d },
            "by_component" => DropoutMode::ByComponent { d },
            other => return Err(PyValueError::new_err(format!("unknown dropout mode {other:?}"))),
        },
    };
    let cfg = BoConfig { n_init, budget, seed, dropout, ..Default::default() };
    let bounds: Vec<[f64; 2]> = bounds.into_iter().map(|(lo, hi)| [lo, hi]).collect();
    let raised: RefCell<Option<PyErr>> = RefCell::new(None);
    let result = core_run_bo(
        |x, _| {
            f.call1((x.to_vec(),)).and_then(|v| v.extract::<f64>()).map_err(|e| {
                raised.replace(Some(e));
                Error::Input("python objective raised".into())
            })
        },
        &bounds,
        &cfg,
    );
    if let Some(e) = raised.into_inner() {
        return Err(e);
    }
    let trace = result.map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("best_x", trace.best_x.clone())?;
    d.set_item("best_objective", trace.best_objective)?;
    d.set_item("xs", trace.evaluations.iter().map(|e| e.x.clone()).collect::<Vec<_>>())?;
    d.set_item("objectives", trace.evaluations.iter().map(|e| e.objective).collect::<Vec<_>>())?;
    d.set_item("incumbent", trace.incumbent_series)?;
    Ok(d)
}

#[pymodule]
fn todp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyToll>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(speed, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_day, m)?)?;
    m.add_function(wrap_pyfunction!(build_population, m)?)?;
    m.add_function(wrap_pyfunction!(run_bo, m)?)?;
    Ok(())
}
