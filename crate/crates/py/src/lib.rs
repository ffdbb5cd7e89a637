//! Python bindings over the `punn` core: datasets, single runs, grids and
//! the statistical tests.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use punn::data::{load_csv, Schema, SplitDataset, DEFAULT_TRAIN_RATIO};
use punn::grid::{base_config_for, expand_grid_2param, expand_grid_3param, BaseConfig};
use punn::stats::{compare_configs, RunSet, TestOutcome};
use punn::{Error, ErrorKind};

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Ingestion => PyIOError::new_err(e.to_string()),
        ErrorKind::Precondition => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A train/test split with min/max normalisation fitted on the training side.
#[pyclass(frozen, name = "Split")]
struct PySplit(SplitDataset);

#[pymethods]
impl PySplit {
    /// Reads a split written by `save` or by the command-line tool.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        SplitDataset::load(path).map(PySplit).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn n_inputs(&self) -> usize {
        self.0.n_inputs()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.0.n_classes()
    }

    #[getter]
    fn train_size(&self) -> usize {
        self.0.train.len()
    }

    #[getter]
    fn test_size(&self) -> usize {
        self.0.test.len()
    }

    /// Normalised training rows, each feature in [1, 2].
    fn train_rows(&self) -> Vec<Vec<f64>> {
        self.0.train.rows().map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Split({:?}, inputs={}, classes={}, train={}, test={})",
            self.0.name,
            self.0.n_inputs(),
            self.0.n_classes(),
            self.0.train.len(),
            self.0.test.len()
        )
    }
}

/// Loads a delimited file (schema defaults to the same path with `.toml`)
/// and splits it with stratified sampling.
#[pyfunction]
#[pyo3(signature = (data, schema=None, train_ratio=DEFAULT_TRAIN_RATIO, seed=1))]
fn load_split(data: PathBuf, schema: Option<PathBuf>, train_ratio: f64, seed: u64) -> PyResult<PySplit> {
    let schema_path = schema.unwrap_or_else(|| data.with_extension("toml"));
    let schema = Schema::load(schema_path).map_err(py_err)?;
    let raw = load_csv(&data, &schema).map_err(py_err)?;
    SplitDataset::from_raw(&raw, train_ratio, seed)
        .map(PySplit)
        .map_err(py_err)
}

#[pyclass(frozen, get_all, name = "Run")]
struct PyRun {
    seed: u64,
    train_ccr: f64,
    test_ccr: f64,
    connections: usize,
    topology: String,
    seconds: f64,
    /// Best training fitness per generation, generation 0 first.
    best_fitness: Vec<f64>,
}

#[pymethods]
impl PyRun {
    fn __repr__(&self) -> String {
        format!(
            "Run(seed={}, test_ccr={:.4}, connections={}, topology={:?})",
            self.seed, self.test_ccr, self.connections, self.topology
        )
    }
}

/// One seeded run. The hidden-node and generation budgets and alpha2 come
/// from the dataset's base configuration unless given; `column` picks a
/// grid column such as `"4"` or `"2*"` instead.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (split, seed=1, neu=None, gen=None, alpha2=None, column=None, population=None))]
fn run_ea(
    py: Python<'_>,
    split: &PySplit,
    seed: u64,
    neu: Option<usize>,
    gen: Option<usize>,
    alpha2: Option<f64>,
    column: Option<&str>,
    population: Option<usize>,
) -> PyResult<PyRun> {
    let data = &split.0;
    let mut base = base_config_for(&data.name).unwrap_or_else(|_| {
        let common = punn::evolution::EAParams::default();
        BaseConfig {
            dataset: data.name.clone(),
            neu: common.max_hidden,
            gen: common.max_generations,
            alpha2: Some(common.alpha2_init),
            common,
        }
    });
    base.neu = neu.unwrap_or(base.neu);
    base.gen = gen.unwrap_or(base.gen);
    base.alpha2 = alpha2.or(base.alpha2);
    if let Some(p) = population {
        base.common.population_size = p;
    }
    base.validate().map_err(py_err)?;
    let config = match column {
        None => base.as_config(false),
        Some(c) => {
            let index: punn::grid::ConfigIndex = c.parse().map_err(py_err)?;
            let grid = if index.two_param {
                expand_grid_2param(&base)
            } else {
                expand_grid_3param(&base)
            };
            grid.map_err(py_err)?[usize::from(index.position) - 1].clone()
        }
    };
    let run = py
        .detach(|| punn::evolution::run_ea(&config.params, data, seed))
        .map_err(py_err)?;
    Ok(PyRun {
        seed: run.seed,
        train_ccr: run.train_ccr,
        test_ccr: run.test_ccr,
        connections: run.connections,
        topology: run.topology,
        seconds: run.seconds,
        best_fitness: run.trace.records.iter().map(|r| r.best_fitness).collect(),
    })
}

/// The eight grid columns for a dataset's base configuration as
/// `(label, neu, gen, alpha2)` tuples.
#[pyfunction]
#[pyo3(signature = (dataset, two_param=false))]
fn grid(dataset: &str, two_param: bool) -> PyResult<Vec<(String, usize, usize, f64)>> {
    let base = base_config_for(dataset).map_err(py_err)?;
    let cols = if two_param {
        expand_grid_2param(&base)
    } else {
        expand_grid_3param(&base)
    }
    .map_err(py_err)?;
    Ok(cols
        .iter()
        .map(|c| (c.index.to_string(), c.neu(), c.gen(), c.alpha2()))
        .collect())
}

#[pyfunction]
fn speedup(t1: f64, tp: f64) -> PyResult<f64> {
    punn::cluster::speedup(t1, tp).map_err(py_err)
}

#[pyfunction]
fn efficiency(speedup: f64, nodes: usize) -> PyResult<f64> {
    if nodes == 0 {
        return Err(PyValueError::new_err("nodes must be >= 1"));
    }
    Ok(punn::cluster::efficiency(speedup, nodes))
}

/// Cuts `x` to `places` decimals, the way the benchmark tables print.
#[pyfunction]
fn truncate_decimals(x: f64, places: i32) -> f64 {
    punn::cluster::truncate_decimals(x, places)
}

fn pair(t: TestOutcome) -> (f64, f64) {
    (t.statistic, t.p_value)
}

/// Kolmogorov-Smirnov normality test, `(D, p)`.
#[pyfunction]
fn ks_normality(sample: Vec<f64>) -> PyResult<(f64, f64)> {
    punn::stats::ks_normality(&sample).map(pair).map_err(py_err)
}

/// Levene's test for equal variances, `(F, p)`.
#[pyfunction]
fn levene(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    punn::stats::levene(&a, &b).map(pair).map_err(py_err)
}

/// Two-sample t test, Student's or Welch's, `(t, p)`.
#[pyfunction]
#[pyo3(signature = (a, b, equal_variances=true))]
fn t_test(a: Vec<f64>, b: Vec<f64>, equal_variances: bool) -> PyResult<(f64, f64)> {
    punn::stats::t_test(&a, &b, equal_variances).map(pair).map_err(py_err)
}

/// Base against best configuration; returns the report text.
#[pyfunction]
#[pyo3(signature = (base_ccr, base_connections, best_ccr, best_connections, dataset="data"))]
fn compare(
    base_ccr: Vec<f64>,
    base_connections: Vec<f64>,
    best_ccr: Vec<f64>,
    best_connections: Vec<f64>,
    dataset: &str,
) -> PyResult<String> {
    let set = |label: &str, ccr, connections| RunSet {
        dataset: dataset.to_string(),
        label: label.to_string(),
        ccr,
        connections,
    };
    let report = compare_configs(
        &set("base", base_ccr, base_connections),
        &set("best", best_ccr, best_connections),
    )
    .map_err(py_err)?;
    Ok(report.narrative())
}

#[pyfunction]
fn softmax(f: Vec<f64>) -> Vec<f64> {
    punn::network::softmax(&f)
}

/// Fitness `1 / (1 + error)` for a mean cross-entropy.
#[pyfunction]
fn fitness(error: f64) -> PyResult<f64> {
    punn::network::fitness(error).map_err(py_err)
}

#[pymodule]
fn punn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySplit>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(load_split, m)?)?;
    m.add_function(wrap_pyfunction!(run_ea, m)?)?;
    m.add_function(wrap_pyfunction!(grid, m)?)?;
    m.add_function(wrap_pyfunction!(speedup, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(truncate_decimals, m)?)?;
    m.add_function(wrap_pyfunction!(ks_normality, m)?)?;
    m.add_function(wrap_pyfunction!(levene, m)?)?;
    m.add_function(wrap_pyfunction!(t_test, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(fitness, m)?)?;
    m.add("PROTOCOL_VERSION", punn::cluster::PROTOCOL_VERSION)?;
    Ok(())
}
