//! Python bindings. Structured results come back as plain dicts; parameter
//! dicts use the same keys as the JSON config sections.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use wiesner_core::states::StateIndex;
use wiesner_core::threshold::ThresholdError;
use wiesner_core::{ChannelParams, HorizonParams, MeanPhotonNumber};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn threshold_err(e: ThresholdError) -> PyErr {
    match e {
        ThresholdError::Solver { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned + Default>(py: Python<'_>, d: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let Some(d) = d else { return Ok(T::default()) };
    let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// `{"p0", "p1", "p2plus"}` for a Poisson source of mean `mu`.
#[pyfunction]
fn poisson_split<'py>(py: Python<'py>, mu: f64) -> PyResult<Bound<'py, PyAny>> {
    let mu = MeanPhotonNumber::new(mu).map_err(value_err)?;
    to_py(py, &wiesner_core::poisson_split(mu))
}

/// Density matrix of money state `k` (0..3 for H, sigma+, V, sigma-) as a
/// 7x7 nested list of complex numbers.
#[pyfunction]
fn money_state(k: usize, mu: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let k = StateIndex::new(k).map_err(value_err)?;
    let mu = MeanPhotonNumber::new(mu).map_err(value_err)?;
    let m = wiesner_core::money_state(k, mu).rho.matrix().clone();
    Ok((0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect())
}

#[pyfunction]
fn compute_threshold<'py>(py: Python<'py>, mu: f64, eta: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| wiesner_core::compute_threshold(mu, eta))
        .map_err(threshold_err)?;
    to_py(py, &r)
}

/// Threshold grid; failed cells are reported in place rather than raised.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, mu_values: Vec<f64>, eta_values: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| wiesner_core::sweep(&mu_values, &eta_values))
        .map_err(threshold_err)?;
    to_py(py, &r)
}

#[pyclass(name = "SecretKey", frozen)]
struct PySecretKey(wiesner_core::SecretKey);

#[pymethods]
impl PySecretKey {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// `(basis, bit)` pairs with basis `"linear"` or `"circular"`.
    fn entries<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.entries)
    }
}

#[pyfunction]
#[pyo3(signature = (length, seed = 2024))]
fn keygen(length: usize, seed: u64) -> PyResult<PySecretKey> {
    wiesner_core::keygen(length, seed).map(PySecretKey).map_err(value_err)
}

/// Simulates `cycles` passes over `key`. `channel` takes the keys of the
/// config's `channel` section plus `mu`.
#[pyfunction]
#[pyo3(signature = (key, cycles = 4000, seed = 2024, channel = None))]
fn run_protocol<'py>(
    py: Python<'py>,
    key: &PySecretKey,
    cycles: usize,
    seed: u64,
    channel: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let params: ChannelParams = from_py(py, channel)?;
    let report = py
        .detach(|| wiesner_core::run_protocol(&key.0, &params, cycles, seed))
        .map_err(value_err)?;
    to_py(py, &report)
}

/// Verdict for a measured `epsilon +- stderr` at `(mu, eta)`.
#[pyfunction]
#[pyo3(signature = (mu, eta, epsilon, stderr, k = 0.0))]
fn verdict<'py>(py: Python<'py>, mu: f64, eta: f64, epsilon: f64, stderr: f64, k: f64) -> PyResult<Bound<'py, PyAny>> {
    let th = py
        .detach(|| wiesner_core::compute_threshold(mu, eta))
        .map_err(threshold_err)?;
    let v = wiesner_core::protocol::verdict_from_values(Some(epsilon), Some(stderr), th.epsilon_threshold, k);
    let out = to_py(py, &v)?;
    out.set_item("summary", v.summary())?;
    Ok(out)
}

/// `params` takes the keys of the config's `horizon` section plus `mu`.
#[pyfunction]
#[pyo3(signature = (params = None))]
fn secure_storage_horizon<'py>(py: Python<'py>, params: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyAny>> {
    let p: HorizonParams = from_py(py, params)?;
    let r = py
        .detach(|| wiesner_core::secure_storage_horizon(&p))
        .map_err(|e| match e {
            wiesner_core::horizon::HorizonError::Threshold(t) => threshold_err(t),
            e => value_err(e),
        })?;
    to_py(py, &r)
}

#[pymodule]
fn wiesner(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySecretKey>()?;
    m.add_function(wrap_pyfunction!(poisson_split, m)?)?;
    m.add_function(wrap_pyfunction!(money_state, m)?)?;
    m.add_function(wrap_pyfunction!(compute_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(keygen, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(verdict, m)?)?;
    m.add_function(wrap_pyfunction!(secure_storage_horizon, m)?)?;
    Ok(())
}
