//! Python bindings: analytic helpers and scenario runs.

use std::path::{Path, PathBuf};

use parksim::figures;
use parksim::metrics::{self, InsightInputs};
use parksim::output::{write_results, PointResult};
use parksim::scenario::{run_points, Scenario};
use parksim::traffic;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl ToString) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Probability of exactly `k` status changes in `[0, t]` for Weibull
/// holding times with scale `gamma` and shape `nu`.
#[pyfunction]
#[pyo3(signature = (k, t, gamma = 1.0, nu = 1.0))]
fn count_probability(k: usize, t: f64, gamma: f64, nu: f64) -> PyResult<f64> {
    traffic::count_probability(k, t, gamma, nu).map_err(value_err)
}

#[pyfunction]
fn analytic_delay_schedule(p1: f64, cycle: f64) -> PyResult<f64> {
    metrics::analytic_delay_schedule(p1, cycle).map_err(value_err)
}

#[pyfunction]
fn analytic_delay_contention(p1: f64, p2: f64, cycle: f64) -> PyResult<f64> {
    metrics::analytic_delay_contention(p1, p2, cycle).map_err(value_err)
}

/// Mean delay from per-cycle success probabilities `p[k-1]`.
#[pyfunction]
fn analytic_delay_general(p: Vec<f64>, cycle: f64) -> PyResult<f64> {
    metrics::analytic_delay_general(&p, cycle).map_err(value_err)
}

#[pyfunction]
fn analytic_delay_periodic(omega: f64, p1: f64, p2: f64, cycle: f64) -> PyResult<f64> {
    metrics::analytic_delay_periodic(omega, p1, p2, cycle).map_err(value_err)
}

/// Design thresholds for a cell, returned as a dict.
#[pyfunction]
#[pyo3(signature = (sensors, mean_occupied, mean_vacant, slot, inactive = 0.0, omega = None))]
fn insights<'py>(
    py: Python<'py>,
    sensors: usize,
    mean_occupied: f64,
    mean_vacant: f64,
    slot: f64,
    inactive: f64,
    omega: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::insight_thresholds(&InsightInputs {
        sensors,
        mean_occupied,
        mean_vacant,
        slot,
        inactive,
        omega,
    })
    .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("slot_max", r.slot_max)?;
    d.set_item("max_nodes_periodic", r.max_nodes_periodic)?;
    d.set_item("schedule_recommended", r.schedule_recommended)?;
    d.set_item("at_boundary", r.at_boundary)?;
    d.set_item("recommendation_threshold", r.recommendation_threshold)?;
    Ok(d)
}

/// Identifiers of the catalogued figures.
#[pyfunction]
fn figure_ids() -> Vec<&'static str> {
    figures::FIGURES.iter().map(|f| f.id).collect()
}

fn point_dict<'py>(py: Python<'py>, p: &PointResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("index", p.point.index)?;
    d.set_item("label", p.point.label())?;
    let desc = &p.descriptor;
    d.set_item("mac_mode", desc.mac_mode.as_str())?;
    d.set_item("traffic_mode", desc.traffic_mode.as_str())?;
    d.set_item("sensors", desc.sensors)?;
    d.set_item("mean_cycle", desc.mean_cycle)?;
    d.set_item("omega", desc.omega)?;
    d.set_item("slot", desc.slot)?;
    d.set_item("tpo_dbm", desc.tpo_dbm)?;
    let m = PyDict::new(py);
    for (name, s) in &p.results.aggregate {
        let e = PyDict::new(py);
        e.set_item("n", s.n)?;
        e.set_item("mean", s.mean)?;
        e.set_item("std", s.std)?;
        e.set_item("stderr", s.stderr)?;
        m.set_item(*name, e)?;
    }
    d.set_item("metrics", m)?;
    Ok(d)
}

fn run(
    py: Python<'_>,
    scenario: &Scenario,
    seed: Option<u64>,
    batches: Option<u32>,
    parallel: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<Vec<Py<PyDict>>> {
    let seed = seed.unwrap_or(scenario.seed);
    let batches = batches.unwrap_or(scenario.batches);
    if batches == 0 {
        return Err(value_err("batches must be >= 1"));
    }
    let prepared = scenario.prepare().map_err(value_err)?;
    let results = py
        .detach(|| run_points(scenario, &prepared, seed, batches, parallel))
        .map_err(runtime_err)?;
    if let Some(dir) = out_dir {
        write_results(&dir, scenario, seed, batches, &results).map_err(runtime_err)?;
    }
    results.iter().map(|p| point_dict(py, p).map(Bound::unbind)).collect()
}

/// Runs a scenario given as TOML text. Relative topology paths resolve
/// against `base_dir`. With `out_dir`, the CSV and metadata files are
/// written as by the command line tool. Returns one dict per sweep point.
#[pyfunction]
#[pyo3(signature = (toml, seed = None, batches = None, parallel = 1, out_dir = None, base_dir = None))]
fn run_scenario(
    py: Python<'_>,
    toml: &str,
    seed: Option<u64>,
    batches: Option<u32>,
    parallel: usize,
    out_dir: Option<PathBuf>,
    base_dir: Option<PathBuf>,
) -> PyResult<Vec<Py<PyDict>>> {
    let mut s = Scenario::from_toml(toml).map_err(value_err)?;
    s.base_dir = base_dir.unwrap_or_default();
    run(py, &s, seed, batches, parallel, out_dir)
}

/// Same as `run_scenario`, reading the scenario from a file.
#[pyfunction]
#[pyo3(signature = (path, seed = None, batches = None, parallel = 1, out_dir = None))]
fn run_scenario_file(
    py: Python<'_>,
    path: PathBuf,
    seed: Option<u64>,
    batches: Option<u32>,
    parallel: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<Vec<Py<PyDict>>> {
    let s = Scenario::load(Path::new(&path)).map_err(value_err)?;
    run(py, &s, seed, batches, parallel, out_dir)
}

#[pymodule]
#[pyo3(name = "parksim")]
fn parksim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(count_probability, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_delay_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_delay_contention, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_delay_general, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_delay_periodic, m)?)?;
    m.add_function(wrap_pyfunction!(insights, m)?)?;
    m.add_function(wrap_pyfunction!(figure_ids, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_file, m)?)?;
    Ok(())
}
