//! Python bindings. Built as the `hvsm` extension module.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use hvsm::dataset::{FileKey, ManifestVersion, MetricSet, ProjectHistory, ProjectManifest};
use hvsm::effort_eval::{self, ScoredFile};
use hvsm::experiment::{emit_report, run_experiment, ExperimentConfig};
use hvsm::history::{extract_hvsm_set, full_window, lifecycle_summary, HvsmSet};
use hvsm::rnn::{self, Hyperparams, RnnModel};
use hvsm::stats::{self, WtlOutcome};
use hvsm::synthetic::{trend_history, TrendSpec};

fn to_py(e: hvsm::Error) -> PyErr {
    match e {
        hvsm::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for hvsm::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Builds scored files from parallel lists; names default to `f0, f1, ...`.
pub fn scored_files(
    scores: &[f64],
    locs: &[u64],
    bugs: &[u32],
    names: Option<&[String]>,
) -> hvsm::Result<Vec<ScoredFile>> {
    if scores.len() != locs.len() || scores.len() != bugs.len() || names.is_some_and(|n| n.len() != scores.len()) {
        return Err(hvsm::Error::InvalidInput("input lists differ in length".into()));
    }
    (0..scores.len())
        .map(|i| {
            let key = match names {
                Some(n) => FileKey::new(&n[i])?,
                None => FileKey::new(&format!("f{i}"))?,
            };
            ScoredFile::new(key, scores[i], locs[i], bugs[i])
        })
        .collect()
}

/// CE at cut-off `pi` of a ranking by predicted score per line of code.
#[pyfunction]
#[pyo3(signature = (scores, locs, bugs, pi=1.0))]
fn ce_pi(scores: Vec<f64>, locs: Vec<u64>, bugs: Vec<u32>, pi: f64) -> PyResult<f64> {
    effort_eval::ce_pi(&scored_files(&scores, &locs, &bugs, None).or_raise()?, pi).or_raise()
}

/// Recall of defective files within the first `effort` fraction of LOC.
#[pyfunction]
#[pyo3(signature = (scores, locs, bugs, effort=0.2))]
fn acc_at_effort(scores: Vec<f64>, locs: Vec<u64>, bugs: Vec<u32>, effort: f64) -> PyResult<f64> {
    effort_eval::acc_at_effort(&scored_files(&scores, &locs, &bugs, None).or_raise()?, effort).or_raise()
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    let pairs: Vec<(f64, u8)> = scores.into_iter().zip(labels).collect();
    effort_eval::auc(&pairs).or_raise()
}

/// CE at 0.1/0.2/0.5/1.0, ACC and AUC as a dict.
#[pyfunction]
#[pyo3(signature = (scores, locs, bugs, names=None))]
fn evaluate(
    scores: Vec<f64>,
    locs: Vec<u64>,
    bugs: Vec<u32>,
    names: Option<Vec<String>>,
) -> PyResult<BTreeMap<String, f64>> {
    let files = scored_files(&scores, &locs, &bugs, names.as_deref()).or_raise()?;
    let report = effort_eval::evaluate(&files).or_raise()?;
    let mut out: BTreeMap<String, f64> = effort_eval::REPORT_METRICS
        .iter()
        .zip(report.values())
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    out.insert("loc_adjusted".into(), report.loc_adjusted as f64);
    Ok(out)
}

/// Two-sided signed-rank test; returns `(p_value, w_plus)`.
#[pyfunction]
fn wilcoxon(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::wilcoxon_signed_rank(&a, &b).or_raise()?;
    Ok((r.p_value, r.statistic))
}

#[pyfunction]
fn cliffs_delta(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::cliffs_delta(&a, &b).or_raise()
}

/// `"win"`, `"tie"` or `"loss"` for `reference` against `other`.
#[pyfunction]
fn win_tie_loss(reference: Vec<f64>, other: Vec<f64>) -> PyResult<&'static str> {
    Ok(match stats::win_tie_loss(&reference, &other).or_raise()? {
        WtlOutcome::Win => "win",
        WtlOutcome::Tie => "tie",
        WtlOutcome::Loss => "loss",
    })
}

/// Technique names grouped into ranks, best first.
#[pyfunction]
#[pyo3(signature = (values, alpha=0.05))]
fn scott_knott(values: BTreeMap<String, Vec<f64>>, alpha: f64) -> PyResult<Vec<Vec<String>>> {
    Ok(stats::scott_knott(&values, alpha).or_raise()?.ranks)
}

/// Worst relative error between BPTT and finite-difference gradients.
#[pyfunction]
#[pyo3(signature = (hidden_size, input_dim, steps, seed=0))]
fn gradient_check(hidden_size: usize, input_dim: usize, steps: usize, seed: u64) -> PyResult<f64> {
    let h = Hyperparams {
        hidden_size,
        seed,
        ..Default::default()
    };
    rnn::gradient_check(&h, input_dim, steps).or_raise()
}

/// Runs an experiment config and writes its report files; returns report.json text.
#[pyfunction]
#[pyo3(signature = (config, output=None))]
fn run(py: Python<'_>, config: PathBuf, output: Option<PathBuf>) -> PyResult<String> {
    py.detach(|| {
        let mut cfg = ExperimentConfig::load(&config)?;
        if let Some(out) = output {
            cfg.output_dir = out;
        }
        let report = run_experiment(&cfg)?;
        emit_report(&report, &cfg.resolved_output_dir())?;
        report.to_json()
    })
    .or_raise()
}

#[pyclass(name = "ProjectHistory", frozen, module = "hvsm")]
struct PyProjectHistory(ProjectHistory);

#[pymethods]
impl PyProjectHistory {
    /// Loads `[(version_id, csv_path), ...]` in release order.
    #[staticmethod]
    #[pyo3(signature = (name, versions, metrics=None))]
    fn from_csvs(name: String, versions: Vec<(String, PathBuf)>, metrics: Option<Vec<String>>) -> PyResult<Self> {
        let manifest = ProjectManifest {
            name,
            versions: versions
                .into_iter()
                .map(|(id, metrics)| ManifestVersion {
                    id,
                    metrics,
                    process: None,
                })
                .collect(),
            metrics,
            columns: Default::default(),
        };
        Ok(Self(manifest.load(Path::new(""), MetricSet::Code).or_raise()?))
    }

    /// Synthetic project whose labels follow the rise of one metric.
    #[staticmethod]
    #[pyo3(signature = (files=600, versions=3, seed=0))]
    fn synthetic_trend(files: usize, versions: usize, seed: u64) -> PyResult<Self> {
        let spec = TrendSpec {
            files,
            versions,
            seed,
            ..Default::default()
        };
        Ok(Self(trend_history(&spec).or_raise()?))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn versions(&self) -> Vec<String> {
        self.0.versions().iter().map(|v| v.version_id().to_string()).collect()
    }

    /// Developing / newborn / dead counts at `version`.
    fn lifecycle(&self, version: &str) -> PyResult<BTreeMap<String, usize>> {
        let s = lifecycle_summary(&self.0, version).or_raise()?;
        Ok(BTreeMap::from([
            ("developing".to_string(), s.developing),
            ("newborn".to_string(), s.newborn),
            ("dead".to_string(), s.dead),
        ]))
    }

    /// HVSM set anchored at `version`; `len` defaults to every earlier version.
    #[pyo3(signature = (version, len=None))]
    fn extract(&self, version: &str, len: Option<usize>) -> PyResult<PyHvsmSet> {
        let len = match len {
            Some(l) => l,
            None => full_window(&self.0, version).or_raise()?,
        };
        Ok(PyHvsmSet(extract_hvsm_set(&self.0, version, len).or_raise()?))
    }

    fn __repr__(&self) -> String {
        format!("ProjectHistory({:?}, versions={:?})", self.0.name(), self.versions())
    }
}

#[pyclass(name = "HvsmSet", frozen, module = "hvsm")]
struct PyHvsmSet(HvsmSet);

#[pymethods]
impl PyHvsmSet {
    #[getter]
    fn anchor_version(&self) -> String {
        self.0.anchor_version.clone()
    }

    fn __len__(&self) -> usize {
        self.0.m()
    }

    fn keys(&self) -> Vec<String> {
        self.0.items.iter().map(|h| h.key.to_string()).collect()
    }

    /// Sequence length T of each file.
    fn lengths(&self) -> Vec<usize> {
        self.0.items.iter().map(|h| h.length()).collect()
    }

    fn labels(&self) -> Vec<Option<u8>> {
        self.0.items.iter().map(|h| h.label).collect()
    }

    fn bug_counts(&self) -> Vec<u32> {
        self.0.items.iter().map(|h| h.bug_count).collect()
    }

    fn locs(&self) -> Vec<u64> {
        self.0.items.iter().map(|h| h.loc()).collect()
    }

    /// Metric rows of file `i`, oldest first.
    fn sequence(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        let h = self
            .0
            .items
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("index {i} out of range")))?;
        Ok(h.sequence.iter().map(|mv| mv.values().to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("HvsmSet(anchor={:?}, files={})", self.0.anchor_version, self.0.m())
    }
}

#[pyclass(name = "RnnModel", frozen, module = "hvsm")]
struct PyRnnModel(RnnModel);

#[pymethods]
impl PyRnnModel {
    #[staticmethod]
    #[pyo3(signature = (
        train, hidden_size=16, eta=0.1, lambda_=1e-4, iterations=500, seed=0,
        init_scale=0.2, halve_on_increase=false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        py: Python<'_>,
        train: &PyHvsmSet,
        hidden_size: usize,
        eta: f64,
        lambda_: f64,
        iterations: usize,
        seed: u64,
        init_scale: f64,
        halve_on_increase: bool,
    ) -> PyResult<Self> {
        let h = Hyperparams {
            hidden_size,
            eta,
            lambda: lambda_,
            iterations,
            seed,
            init_scale,
            halve_on_increase,
        };
        h.validate().or_raise()?;
        let set = &train.0;
        Ok(Self(py.detach(|| RnnModel::fit(set, &h)).or_raise()?))
    }

    /// Defect probability of every file in `set`.
    fn predict(&self, py: Python<'_>, set: &PyHvsmSet) -> PyResult<Vec<f64>> {
        let s = &set.0;
        py.detach(|| self.0.predict_set(s)).or_raise()
    }

    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.0.loss_history.clone()
    }

    #[getter]
    fn hidden_size(&self) -> usize {
        self.0.params.hidden_size()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.0.params.input_dim()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).or_raise()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(RnnModel::load(&path).or_raise()?))
    }

    fn __repr__(&self) -> String {
        format!(
            "RnnModel(input_dim={}, hidden_size={})",
            self.0.params.input_dim(),
            self.0.params.hidden_size()
        )
    }
}

#[pymodule]
#[pyo3(name = "hvsm")]
pub fn hvsm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ce_pi, m)?)?;
    m.add_function(wrap_pyfunction!(acc_at_effort, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(cliffs_delta, m)?)?;
    m.add_function(wrap_pyfunction!(win_tie_loss, m)?)?;
    m.add_function(wrap_pyfunction!(scott_knott, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<PyProjectHistory>()?;
    m.add_class::<PyHvsmSet>()?;
    m.add_class::<PyRnnModel>()?;
    Ok(())
}
