//! Python bindings for the `ris-freqsel` simulator, importable as `ris_freqsel`.

use num_complex::Complex64;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ris_freqsel::harness::{self, AggregateRecord, ExperimentSpec, Simulator, SweepAxis};
use ris_freqsel::metrics::LinkMetrics;
use ris_freqsel::selftest::run_selftest;
use ris_freqsel::synthesis::{passivity_margin, RisProgram, SpectralBasis};
use ris_freqsel::{config, SelectionMethod, SelectionSet};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<SelectionMethod> {
    name.parse().map_err(value_err)
}

fn methods(names: Vec<String>) -> PyResult<Vec<SelectionMethod>> {
    names.iter().map(|m| method(m)).collect()
}

/// Scenario parameters. Keyword arguments override the reference scenario.
#[pyclass(name = "ScenarioConfig", module = "ris_freqsel", from_py_object)]
#[derive(Clone)]
struct PyScenarioConfig {
    inner: config::ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = config::ScenarioConfig::reference_scenario();
        if let Some(kw) = overrides {
            for (key, value) in kw.iter() {
                let key: String = key.extract()?;
                let text = match value.extract::<bool>() {
                    Ok(b) => b.to_string(),
                    Err(_) => value.str()?.to_string().replace(['(', ')', '[', ']'], ""),
                };
                inner.set(&key, &text).map_err(value_err)?;
            }
        }
        inner.validate().map_err(value_err)?;
        Ok(PyScenarioConfig { inner })
    }

    /// Parses `key = value` lines on top of the reference scenario.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        config::load_config(text).map(|inner| PyScenarioConfig { inner }).map_err(value_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Returns a copy with one key changed.
    fn with_value(&self, key: &str, value: &str) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.set(key, value).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(PyScenarioConfig { inner })
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner.get(key).ok_or_else(|| PyKeyError::new_err(key.to_string()))
    }

    #[getter]
    fn num_subcarriers(&self) -> usize {
        self.inner.num_subcarriers
    }

    #[getter]
    fn num_reflectors(&self) -> usize {
        self.inner.num_reflectors()
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.inner.wavelength()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioConfig(K={}, N={}x{}, seed={})",
            self.inner.num_subcarriers, self.inner.n_row, self.inner.n_col, self.inner.seed
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Draws a selection of `size` bins out of `k` with the named method.
#[pyfunction]
#[pyo3(signature = (method_name, size, k, seed=0))]
fn select(method_name: &str, size: usize, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sel = method(method_name)?.draw(&mut rng, size, k).map_err(value_err)?;
    Ok(sel.indices().to_vec())
}

/// Time-domain weights `w = F b` for the selected bins.
#[pyfunction]
fn synthesize_weights(indices: Vec<usize>, k: usize) -> PyResult<Vec<Complex64>> {
    let sel = SelectionSet::from_indices(indices, k).map_err(value_err)?;
    ris_freqsel::synthesis::synthesize_weights(&sel, &SpectralBasis::new(k)).map_err(value_err)
}

/// Per-sample reflection coefficients of an `n`-reflector surface.
#[pyfunction]
fn reflection_program<'py>(py: Python<'py>, indices: Vec<usize>, k: usize, n: usize) -> PyResult<Bound<'py, PyDict>> {
    let sel = SelectionSet::from_indices(indices, k).map_err(value_err)?;
    let program = RisProgram::new(&sel, n, &SpectralBasis::new(k)).map_err(value_err)?;
    let coefficients: Vec<Complex64> = (0..k).map(|i| program.coefficient(i)).collect();
    let d = PyDict::new(py);
    d.set_item("coefficients", coefficients)?;
    d.set_item("phases", program.phases())?;
    d.set_item("active_samples", program.active_samples())?;
    d.set_item("passivity_margin", passivity_margin(&program))?;
    Ok(d)
}

fn metrics_dict<'py>(py: Python<'py>, m: &LinkMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rate_bps", m.rate)?;
    d.set_item("coh_rate_bps", m.coherent_rate)?;
    d.set_item("rel_rate_pct", m.relative_rate)?;
    d.set_item("s_over_i", m.s_over_i.as_f64())?;
    d.set_item("xi", m.xi)?;
    d.set_item("rate_bandwidth", m.rate_bandwidth)?;
    Ok(d)
}

fn record_dict<'py>(py: Python<'py>, r: &AggregateRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", r.method.as_str())?;
    d.set_item("K", r.k)?;
    d.set_item("N", r.n)?;
    d.set_item("sel_size", r.sel_size)?;
    d.set_item("realizations", r.realizations)?;
    d.set_item("finite_count", r.finite_count)?;
    d.set_item("inf_count", r.inf_count)?;
    d.set_item("mean_si_db", r.mean_si_db)?;
    d.set_item("std_si_db", r.std_si_db)?;
    d.set_item("mean_rate_bps", r.mean_rate_bps)?;
    d.set_item("mean_coh_rate_bps", r.mean_coh_rate_bps)?;
    d.set_item("mean_rel_rate_pct", r.mean_rel_rate_pct)?;
    d.set_item("std_rel_rate_pct", r.std_rel_rate_pct)?;
    d.set_item("seed", r.seed)?;
    Ok(d)
}

/// Metrics of realization `index`; `s_over_i` is `inf` when unbounded.
#[pyfunction]
fn run_realization<'py>(
    py: Python<'py>,
    cfg: &PyScenarioConfig,
    method_name: &str,
    sel_size: usize,
    index: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = harness::run_realization(&cfg.inner, method(method_name)?, sel_size, index).map_err(value_err)?;
    metrics_dict(py, &m)
}

/// Aggregates realizations `0..realizations` of one operating point.
#[pyfunction]
#[pyo3(signature = (cfg, method_name, sel_size, realizations=1000))]
fn simulate<'py>(
    py: Python<'py>,
    cfg: &PyScenarioConfig,
    method_name: &str,
    sel_size: usize,
    realizations: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let m = method(method_name)?;
    let inner = cfg.inner.clone();
    let record = py
        .detach(move || Simulator::new(inner)?.aggregate(m, sel_size, realizations))
        .map_err(value_err)?;
    record_dict(py, &record)
}

fn run_spec(py: Python<'_>, spec: ExperimentSpec) -> PyResult<String> {
    let records = py.detach(move || harness::run_sweep(&spec)).map_err(value_err)?;
    Ok(harness::to_csv_string(&records))
}

/// Surface-size sweep; returns the CSV table.
#[pyfunction]
#[pyo3(signature = (cfg, n_list, sel_sizes, methods_list, realizations=1000, threads=None))]
fn sweep_ris_size(
    py: Python<'_>,
    cfg: &PyScenarioConfig,
    n_list: Vec<usize>,
    sel_sizes: Vec<usize>,
    methods_list: Vec<String>,
    realizations: usize,
    threads: Option<usize>,
) -> PyResult<String> {
    let spec = ExperimentSpec {
        base: cfg.inner.clone(),
        axis: SweepAxis::RisSize(n_list),
        methods: methods(methods_list)?,
        sel_sizes,
        realizations,
        threads,
    };
    run_spec(py, spec)
}

/// Selection-size sweep; returns the CSV table.
#[pyfunction]
#[pyo3(signature = (cfg, sel_list, methods_list, realizations=1000, threads=None))]
fn sweep_selection_size(
    py: Python<'_>,
    cfg: &PyScenarioConfig,
    sel_list: Vec<usize>,
    methods_list: Vec<String>,
    realizations: usize,
    threads: Option<usize>,
) -> PyResult<String> {
    let spec = ExperimentSpec {
        base: cfg.inner.clone(),
        axis: SweepAxis::SelectionSize(sel_list),
        methods: methods(methods_list)?,
        sel_sizes: Vec::new(),
        realizations,
        threads,
    };
    run_spec(py, spec)
}

/// Runs the invariant self-test; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (seed=1))]
fn selftest(py: Python<'_>, seed: u64) -> (bool, String) {
    let report = py.detach(|| run_selftest(seed));
    (report.passed(), report.to_string())
}

#[pymodule]
#[pyo3(name = "ris_freqsel")]
fn ris_freqsel_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenarioConfig>()?;
    m.add("CSV_HEADER", harness::CSV_HEADER)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_weights, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_program, m)?)?;
    m.add_function(wrap_pyfunction!(run_realization, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_ris_size, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_selection_size, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
