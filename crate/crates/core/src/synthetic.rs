//! Synthetic projects whose labels depend only on metric trends.
//!
//! Every file exists in every version. At version `k ≥ 3` a file is defective
//! iff the trend metric rose strictly over versions `k−2, k−1, k`. The last
//! value of the trend metric is drawn independently of all labels and earlier
//! values are reconstructed backwards from signed steps, so any single
//! version's metrics carry no label information.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    write_metrics_csv, FileKey, ManifestVersion, MetricVector, ProjectHistory, ProjectManifest, Schema,
    VersionSnapshot, CODE_METRICS,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrendSpec {
    pub name: String,
    pub files: usize,
    pub versions: usize,
    pub seed: u64,
    /// Metric whose trend decides the label.
    pub trend_metric: String,
}

impl Default for TrendSpec {
    fn default() -> Self {
        TrendSpec {
            name: "trend".into(),
            files: 600,
            versions: 3,
            seed: 0,
            trend_metric: "wmc".into(),
        }
    }
}

pub fn trend_history(spec: &TrendSpec) -> Result<ProjectHistory> {
    if spec.versions < 3 {
        return Err(Error::invalid("a trend project needs at least three versions"));
    }
    if spec.files == 0 {
        return Err(Error::invalid("a trend project needs at least one file"));
    }
    let schema = Arc::new(Schema::code_metrics());
    let trend = schema
        .names()
        .iter()
        .position(|n| *n == spec.trend_metric)
        .ok_or_else(|| Error::MissingColumn(spec.trend_metric.clone()))?;
    let loc = schema.loc_index().expect("code metrics include loc");
    if trend == loc {
        return Err(Error::invalid("the trend metric cannot be loc"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.versions;
    // rows[k][f] = metric vector of file f at version k
    let mut rows = vec![Vec::with_capacity(spec.files); n];
    let mut bugs = vec![Vec::with_capacity(spec.files); n];
    for _ in 0..spec.files {
        // rising[k]: whether the step into version k (k ≥ 1) is upward
        let rising: Vec<bool> = (0..n).map(|k| k > 0 && rng.random_bool(0.5)).collect();
        let mut path = vec![0.0; n];
        path[n - 1] = rng.random_range(0.0..10.0);
        for k in (1..n).rev() {
            let step: f64 = rng.random_range(0.5..3.0);
            path[k - 1] = if rising[k] { path[k] - step } else { path[k] + step };
        }
        for k in 0..n {
            let mut values: Vec<f64> = (0..schema.len()).map(|_| rng.random_range(0.0..10.0)).collect();
            values[trend] = path[k];
            values[loc] = rng.random_range(50..=500) as f64;
            rows[k].push(values);
            let defective = k >= 2 && rising[k - 1] && rising[k];
            bugs[k].push(if defective { rng.random_range(1..=3u32) } else { 0 });
        }
    }

    let width = spec.files.to_string().len();
    let keys: Vec<FileKey> = (0..spec.files)
        .map(|f| FileKey::new(&format!("pkg/File{f:0width$}.java")))
        .collect::<Result<_>>()?;
    let versions = rows
        .into_iter()
        .zip(bugs)
        .enumerate()
        .map(|(k, (vals, b))| {
            let mut files = BTreeMap::new();
            let mut labels = BTreeMap::new();
            for ((key, v), bug) in keys.iter().zip(vals).zip(b) {
                files.insert(key.clone(), MetricVector::new(Arc::clone(&schema), v)?);
                labels.insert(key.clone(), bug);
            }
            VersionSnapshot::new(format!("{}", k + 1), Arc::clone(&schema), files, labels)
        })
        .collect::<Result<Vec<_>>>()?;
    ProjectHistory::new(&spec.name, versions)
}

/// Writes one `<name>-<version>.csv` per version into `dir` and returns a
/// manifest with paths relative to `dir`.
pub fn write_project(history: &ProjectHistory, dir: &Path) -> Result<ProjectManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut versions = Vec::new();
    for snap in history.versions() {
        let file_name = format!("{}-{}.csv", history.name(), snap.version_id());
        let path = dir.join(&file_name);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_metrics_csv(snap, file)?;
        versions.push(ManifestVersion {
            id: snap.version_id().to_string(),
            metrics: PathBuf::from(file_name),
            process: None,
        });
    }
    let metrics = history
        .schema()
        .filter(|s| s.names() != CODE_METRICS)
        .map(|s| s.names().to_vec());
    Ok(ProjectManifest {
        name: history.name().to_string(),
        versions,
        metrics,
        columns: Default::default(),
    })
}
