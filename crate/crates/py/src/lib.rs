//! Python bindings for neurometa-core.

use std::sync::Mutex;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use neurometa_core::dataset::{self, FEATURE_COUNT};
use neurometa_core::harness::{self, ExperimentSpec, Method};
use neurometa_core::metaheuristics::{self, Algorithm, Bounds, TrainConfig};
use neurometa_core::metrics::{self, MetricReport};
use neurometa_core::mlp::TrainedModel;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: harness::HarnessError) -> PyErr {
    match e {
        harness::HarnessError::Io { .. } => PyIOError::new_err(e.to_string()),
        e if e.is_data_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn features(x: Vec<f64>) -> PyResult<[f64; FEATURE_COUNT]> {
    let len = x.len();
    x.try_into()
        .map_err(|_| value_err(format!("expected {FEATURE_COUNT} features, got {len}")))
}

fn metric_dict<'py>(py: Python<'py>, r: &MetricReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rmse", r.rmse)?;
    d.set_item("mae", r.mae)?;
    d.set_item("r2", r.r2)?;
    d.set_item("mape", r.mape)?;
    d.set_item("n", r.n)?;
    Ok(d)
}

/// Building records: eight features and the heating load.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(dataset::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        dataset::load_csv(path).map(PyDataset).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn source(&self) -> &str {
        &self.0.source
    }

    #[getter]
    fn checksum(&self) -> Option<&str> {
        self.0.checksum()
    }

    fn features(&self) -> Vec<[f64; FEATURE_COUNT]> {
        self.0.samples.iter().map(|s| s.features()).collect()
    }

    fn targets(&self) -> Vec<f64> {
        self.0.samples.iter().map(|s| s.heating_load).collect()
    }

    #[pyo3(signature = (train_fraction = dataset::DEFAULT_TRAIN_FRACTION, seed = dataset::DEFAULT_SPLIT_SEED))]
    fn split(&self, train_fraction: f64, seed: u64) -> PyResult<PySplit> {
        dataset::split(&self.0, train_fraction, seed).map(PySplit).map_err(value_err)
    }
}

#[pyclass(name = "Split", frozen)]
struct PySplit(dataset::DataSplit);

#[pymethods]
impl PySplit {
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn train_fraction(&self) -> f64 {
        self.0.train_fraction
    }

    #[getter]
    fn train_indices(&self) -> Vec<usize> {
        self.0.train_indices.clone()
    }

    #[getter]
    fn test_indices(&self) -> Vec<usize> {
        self.0.test_indices.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(PySplit).map_err(value_err)
    }
}

/// Min-max scaling to [-1, 1].
#[pyclass(name = "Scaler", frozen)]
struct PyScaler(dataset::Scaler);

#[pymethods]
impl PyScaler {
    /// Fits on the given rows, or on every row when `indices` is omitted.
    #[staticmethod]
    #[pyo3(signature = (data, indices = None))]
    fn fit(data: &PyDataset, indices: Option<Vec<usize>>) -> PyResult<Self> {
        let rows = match indices {
            Some(ix) => data.0.select(&ix).map_err(value_err)?,
            None => data.0.samples.clone(),
        };
        dataset::Scaler::fit(&rows).map(PyScaler).map_err(value_err)
    }

    fn scale_features(&self, x: Vec<f64>) -> PyResult<[f64; FEATURE_COUNT]> {
        Ok(self.0.scale_features(&features(x)?))
    }

    fn scale_target(&self, y: f64) -> f64 {
        self.0.scale_target(y)
    }

    fn unscale_target(&self, y: f64) -> f64 {
        self.0.unscale_target(y)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(value_err)
    }
}

/// A trained 8-H-1 network with its scaler.
#[pyclass(name = "Model", frozen)]
struct PyModel(TrainedModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let m = TrainedModel::from_json(text).map_err(value_err)?;
        m.validate().map_err(value_err)?;
        Ok(PyModel(m))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.0.clone()
    }

    #[getter]
    fn algorithm(&self) -> &str {
        &self.0.provenance.algorithm
    }

    /// Heating load for one building.
    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        let x = features(x)?;
        dataset::validate_features(&x, 1).map_err(value_err)?;
        Ok(self.0.predict_features(&x))
    }

    fn predict_many(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        rows.into_iter().map(|x| self.predict(x)).collect()
    }

    /// Train and test metrics on `split`.
    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset, split: &PySplit) -> PyResult<(Bound<'py, PyDict>, Bound<'py, PyDict>)> {
        let (train, test) = harness::evaluate(&self.0, &data.0, &split.0).map_err(harness_err)?;
        Ok((metric_dict(py, &train)?, metric_dict(py, &test)?))
    }
}

/// Outcome of one training run.
#[pyclass(name = "Experiment", frozen)]
struct PyExperiment(harness::Experiment);

#[pymethods]
impl PyExperiment {
    #[getter]
    fn model(&self) -> PyModel {
        PyModel(self.0.model.clone())
    }

    #[getter]
    fn train<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metric_dict(py, &self.0.train)
    }

    #[getter]
    fn test<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metric_dict(py, &self.0.test)
    }

    #[getter]
    fn curve(&self) -> Vec<f64> {
        self.0.result.curve.0.clone()
    }

    #[getter]
    fn best_mse(&self) -> f64 {
        self.0.result.best_objective
    }

    #[getter]
    fn evaluations(&self) -> u64 {
        self.0.result.evaluations
    }

    #[getter]
    fn wall_time(&self) -> f64 {
        self.0.result.wall_time
    }

    #[getter]
    fn status(&self) -> String {
        serde_json::to_value(self.0.result.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

/// Trains one model on the seeded split. `method` is alo, bbo, da, es, iwo,
/// lca or lm; for lm, `iterations` caps the epochs.
#[pyfunction]
#[pyo3(signature = (
    data, method, population = None, iterations = harness::DEFAULT_ITERATIONS, seed = 1,
    split_seed = dataset::DEFAULT_SPLIT_SEED, train_fraction = dataset::DEFAULT_TRAIN_FRACTION,
    bound = metaheuristics::DEFAULT_WEIGHT_BOUND,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data: &PyDataset,
    method: &str,
    population: Option<usize>,
    iterations: usize,
    seed: u64,
    split_seed: u64,
    train_fraction: f64,
    bound: f64,
) -> PyResult<PyExperiment> {
    let method: Method = method.parse().map_err(value_err)?;
    let pop = population.unwrap_or(match method {
        Method::Meta(a) => a.published_best_population(),
        Method::Lm => 1,
    });
    let mut spec = ExperimentSpec::new(method, pop, iterations, seed);
    spec.split_seed = split_seed;
    spec.train_fraction = train_fraction;
    spec.config.bounds = Bounds::uniform(spec.config.dim(), -bound, bound);
    let data = data.0.clone();
    py.detach(move || harness::run_experiment(&data, &spec))
        .map(PyExperiment)
        .map_err(harness_err)
}

/// The published BBO network with a scaler fitted on every row of `data`.
#[pyfunction]
fn reference_model(data: &PyDataset) -> PyResult<PyModel> {
    harness::reference_model(&data.0).map(PyModel).map_err(harness_err)
}

/// Minimizes a Python callable over a box. Returns (best vector, best value,
/// best-so-far curve, evaluations).
#[pyfunction]
#[pyo3(signature = (algorithm, objective, low, high, population, iterations, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    py: Python<'_>,
    algorithm: &str,
    objective: Py<PyAny>,
    low: Vec<f64>,
    high: Vec<f64>,
    population: usize,
    iterations: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, f64, Vec<f64>, u64)> {
    let algorithm: Algorithm = algorithm.parse().map_err(value_err)?;
    if low.len() != high.len() {
        return Err(value_err("low and high differ in length"));
    }
    let mut config = TrainConfig::new(low.len(), population, iterations, seed);
    config.bounds = Bounds { low, high };
    let raised: Mutex<Option<PyErr>> = Mutex::new(None);
    let f = |x: &[f64]| -> f64 {
        Python::attach(|py| match objective.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)) {
            Ok(v) => v,
            Err(e) => {
                raised.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        })
    };
    let out = py.detach(|| metaheuristics::run(algorithm, &config, &f));
    if let Some(e) = raised.into_inner().unwrap() {
        return Err(e);
    }
    let r = out.map_err(value_err)?;
    Ok((r.best_vector, r.best_objective, r.curve.0, r.evaluations))
}

#[pyfunction]
fn rmse(observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&observed, &predicted).map_err(value_err)
}

#[pyfunction]
fn mae(observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&observed, &predicted).map_err(value_err)
}

#[pyfunction]
fn r2(observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::r2(&observed, &predicted).map_err(value_err)
}

#[pyfunction]
fn mape(observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::mape(&observed, &predicted).map_err(value_err)
}

/// Ranks models from a metrics CSV (model, then train and test RMSE, MAE, R²)
/// and returns the score table as CSV.
#[pyfunction]
fn rank_csv(text: &str) -> PyResult<String> {
    let reports = metrics::reports_from_csv(text).map_err(value_err)?;
    harness::rank_models(&reports).map(|(_, csv)| csv).map_err(harness_err)
}

#[pymodule]
fn neurometa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DEFAULT_SPLIT_SEED", dataset::DEFAULT_SPLIT_SEED)?;
    m.add("ALGORITHMS", Algorithm::ALL.map(|a| a.name()).to_vec())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyScaler>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(reference_model, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(rank_csv, m)?)?;
    Ok(())
}
