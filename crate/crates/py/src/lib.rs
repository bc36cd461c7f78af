//! Python bindings for the federated boosting engine: dataset loading,
//! training over the simulated federation, prediction, metrics, schedule
//! tables, and the runtime estimator.

// pyo3's generated glue trips this lint on every fallible signature.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fedgbf::bench::experiment::train_test_split;
use fedgbf::bench::metrics;
use fedgbf::bench::runtime::{self, RoundLoad, RuntimeModel};
use fedgbf::bench::synth::{generate, SynthSpec};
use fedgbf::crypto::{BackendChoice, FixedPointCodec};
use fedgbf::dataset::{load_csv, partition_vertically, CsvSchema, RawTable};
use fedgbf::engine::centralized::CentralizedContext;
use fedgbf::engine::federated::FederatedContext;
use fedgbf::engine::{train as engine_train, BoostContext, TrainConfig};
use fedgbf::scheduler::{schedule_table, schedule_value, ScheduleSpec};
use fedgbf::tree::grad::sigmoid;
use fedgbf::tree::model::ResolvedModel;

fn to_py_err(e: fedgbf::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Schedule argument: a bare number (constant), `(direction, min, max)`,
/// or `(direction, min, max, k)`.
#[derive(FromPyObject)]
enum SchedArg {
    Constant(f64),
    Short(String, f64, f64),
    Full(String, f64, f64, f64),
}

impl SchedArg {
    fn spec(&self) -> PyResult<ScheduleSpec> {
        let (direction, min, max, k) = match self {
            SchedArg::Constant(v) => return Ok(ScheduleSpec::constant(*v)),
            SchedArg::Short(d, min, max) => (d.as_str(), *min, *max, 1.0),
            SchedArg::Full(d, min, max, k) => (d.as_str(), *min, *max, *k),
        };
        let spec = match direction {
            "constant" if min == max => ScheduleSpec::constant(min),
            "decay" => ScheduleSpec::decay(max, min, k),
            "growth" => ScheduleSpec::growth(min, max, k),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown schedule direction `{other}` (constant | decay | growth)"
                )))
            }
        };
        spec.validate().map_err(to_py_err)?;
        Ok(spec)
    }
}

fn parse_direction(direction: &str, min: f64, max: f64, k: f64) -> PyResult<ScheduleSpec> {
    SchedArg::Full(direction.to_string(), min, max, k).spec()
}

/// A loaded dataset: aligned rows, feature columns, optional labels.
#[pyclass(name = "Table")]
struct PyTable {
    inner: RawTable,
}

#[pymethods]
impl PyTable {
    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Labels, or None for unlabeled tables.
    #[getter]
    fn labels(&self) -> Option<Vec<f64>> {
        self.inner.labels.clone()
    }

    /// Feature matrix as columns, `columns[feature][row]`; missing cells
    /// are NaN.
    fn columns(&self) -> Vec<Vec<f64>> {
        self.inner.features.iter().map(|f| f.values.clone()).collect()
    }

    /// Seeded shuffle split into (train, test).
    #[pyo3(signature = (test_fraction=0.3, seed=42))]
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(PyTable, PyTable)> {
        let (train_rows, test_rows) =
            train_test_split(self.inner.n_rows(), test_fraction, seed).map_err(to_py_err)?;
        Ok((
            PyTable { inner: self.inner.select_rows(&train_rows).map_err(to_py_err)? },
            PyTable { inner: self.inner.select_rows(&test_rows).map_err(to_py_err)? },
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "Table({} rows x {} features, {})",
            self.inner.n_rows(),
            self.inner.n_features(),
            if self.inner.labels.is_some() { "labeled" } else { "unlabeled" },
        )
    }
}

/// A trained, fully resolved boosted forest.
#[pyclass(name = "Model")]
struct PyModel {
    inner: ResolvedModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn rounds(&self) -> usize {
        self.inner.layers.len()
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.learning_rate
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    /// Additive margins for `columns[feature][row]`.
    fn margins(&self, columns: Vec<Vec<f64>>) -> Vec<f64> {
        self.inner.margin_batch(&columns)
    }

    /// Positive-class probabilities for `columns[feature][row]`.
    fn predict_proba(&self, columns: Vec<Vec<f64>>) -> Vec<f64> {
        self.inner.margin_batch(&columns).into_iter().map(sigmoid).collect()
    }

    /// Canonical JSON; byte-equal strings mean identical models.
    fn to_json(&self) -> PyResult<String> {
        let bytes = self.inner.canonical_bytes().map_err(to_py_err)?;
        String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<PyModel> {
        Ok(PyModel { inner: ResolvedModel::load(path).map_err(to_py_err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({} rounds, lr {}, {} features)",
            self.inner.layers.len(),
            self.inner.learning_rate,
            self.inner.feature_names.len(),
        )
    }
}

/// Load a CSV (header row; empty/NA/NaN/? cells become missing values).
#[pyfunction]
#[pyo3(signature = (path, id_column=None, label_column=None))]
fn read_csv(path: &str, id_column: Option<String>, label_column: Option<String>) -> PyResult<PyTable> {
    let schema = CsvSchema { id_column, label_column };
    Ok(PyTable { inner: load_csv(path, &schema).map_err(to_py_err)? })
}

/// Generate the synthetic binary-classification benchmark table.
#[pyfunction]
#[pyo3(signature = (rows=2000, features=10, missing_rate=0.02, seed=17))]
fn synth_table(rows: usize, features: usize, missing_rate: f64, seed: u64) -> PyTable {
    PyTable { inner: generate(&SynthSpec { rows, features, missing_rate, seed }) }
}

/// Train a boosted forest on a labeled table.
///
/// `partition` splits the columns left-to-right into one slice per party
/// (the first holds the labels); training then runs over the simulated
/// federation with encrypted gradient aggregation. `centralized=True`
/// instead trains directly on the unioned columns — with the mock
/// backend both paths produce the identical model.
#[pyfunction]
#[pyo3(signature = (
    table,
    partition,
    rounds,
    *,
    trees=None,
    sample_rate=None,
    feature_rate=None,
    learning_rate=0.1,
    reg_lambda=1.0,
    gamma=0.0,
    max_depth=3,
    bins=32,
    min_leaf_rows=10,
    seed=17,
    backend="mock",
    key_bits=1024,
    scale_bits=40,
    centralized=false,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    table: &PyTable,
    partition: Vec<usize>,
    rounds: u32,
    trees: Option<SchedArg>,
    sample_rate: Option<SchedArg>,
    feature_rate: Option<SchedArg>,
    learning_rate: f64,
    reg_lambda: f64,
    gamma: f64,
    max_depth: usize,
    bins: usize,
    min_leaf_rows: usize,
    seed: u64,
    backend: &str,
    key_bits: u32,
    scale_bits: u32,
    centralized: bool,
) -> PyResult<PyModel> {
    let one = SchedArg::Constant(1.0);
    let config = TrainConfig {
        rounds,
        learning_rate,
        lambda: reg_lambda,
        gamma,
        max_depth,
        n_bins: bins,
        trees_per_layer: trees.as_ref().unwrap_or(&one).spec()?,
        row_rate: sample_rate.as_ref().unwrap_or(&one).spec()?,
        feature_rate: feature_rate.as_ref().unwrap_or(&one).spec()?,
        constraints: fedgbf::tree::split::SplitConstraints {
            min_leaf_rows,
            ..Default::default()
        },
        seed,
    };
    let backend = match backend {
        "mock" => BackendChoice::Mock,
        "paillier" => BackendChoice::Paillier { key_bits },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown backend `{other}` (mock | paillier)"
            )))
        }
    };

    let parties = partition_vertically(&table.inner, &partition).map_err(to_py_err)?;
    let inner = if centralized {
        let mut ctx = CentralizedContext::from_parties(&parties, config.n_bins).map_err(to_py_err)?;
        let outcome = engine_train(&mut ctx, &config).map_err(to_py_err)?;
        ctx.resolve(&outcome.model).map_err(to_py_err)?
    } else {
        let codec = FixedPointCodec { scale_bits };
        let mut ctx = FederatedContext::new(parties, backend, codec, config.n_bins, config.seed)
            .map_err(to_py_err)?;
        let outcome = engine_train(&mut ctx, &config).map_err(to_py_err)?;
        ctx.resolve(&outcome.model).map_err(to_py_err)?
    };
    Ok(PyModel { inner })
}

/// Rank AUC (ties count half).
#[pyfunction]
fn auc(labels: Vec<f64>, scores: Vec<f64>) -> PyResult<f64> {
    metrics::auc(&labels, &scores).map_err(to_py_err)
}

/// AUC, accuracy, and F1 at the 0.5 threshold, as a dict.
#[pyfunction]
fn classification_report<'py>(
    py: Python<'py>,
    labels: Vec<f64>,
    scores: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = metrics::classification_report(&labels, &scores).map_err(to_py_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("auc", report.auc)?;
    out.set_item("accuracy", report.accuracy)?;
    out.set_item("f1", report.f1)?;
    out.set_item("positives", report.positives)?;
    out.set_item("negatives", report.negatives)?;
    Ok(out)
}

/// Per-round values of a trig schedule over `rounds` rounds.
#[pyfunction(name = "schedule_table")]
#[pyo3(signature = (direction, min, max, rounds, k=1.0))]
fn py_schedule_table(
    direction: &str,
    min: f64,
    max: f64,
    rounds: u32,
    k: f64,
) -> PyResult<Vec<f64>> {
    let spec = parse_direction(direction, min, max, k)?;
    schedule_table(&spec, rounds).map_err(to_py_err)
}

/// One schedule value at a single round (1-based).
#[pyfunction]
#[pyo3(signature = (direction, min, max, round, rounds, k=1.0))]
fn schedule_at(
    direction: &str,
    min: f64,
    max: f64,
    round: u32,
    rounds: u32,
    k: f64,
) -> PyResult<f64> {
    let spec = parse_direction(direction, min, max, k)?;
    schedule_value(&spec, round, rounds).map_err(to_py_err)
}

/// Runtime bracket for per-round loads `(sample_rate, feature_rate,
/// trees)`, as a dict with `lower`, `upper`, `single_machine`.
#[pyfunction]
fn estimate_runtime<'py>(
    py: Python<'py>,
    unit_time: f64,
    fixed_overhead: f64,
    loads: Vec<(f64, f64, usize)>,
) -> PyResult<Bound<'py, PyDict>> {
    let rounds = loads
        .into_iter()
        .map(|(sample_fraction, feature_fraction, trees)| RoundLoad {
            sample_fraction,
            feature_fraction,
            trees,
        })
        .collect();
    let estimate = runtime::estimate_runtime(&RuntimeModel { unit_time, fixed_overhead, rounds })
        .map_err(to_py_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("lower", estimate.lower)?;
    out.set_item("upper", estimate.upper)?;
    out.set_item("single_machine", estimate.single_machine)?;
    Ok(out)
}

/// `|1 - estimate/real|`, the estimator's headline error measure.
#[pyfunction]
fn error_rate(estimate: f64, real: f64) -> PyResult<f64> {
    runtime::error_rate(estimate, real).map_err(to_py_err)
}

#[pymodule]
fn fedgbf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(read_csv, m)?)?;
    m.add_function(wrap_pyfunction!(synth_table, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(py_schedule_table, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_at, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_runtime, m)?)?;
    m.add_function(wrap_pyfunction!(error_rate, m)?)?;
    Ok(())
}
