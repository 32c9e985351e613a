//! Historical version sequences of metrics (HVSMs).
//!
//! For an anchor version `v` and a window of `len` releases, every file that
//! exists in `v` contributes one sequence: its metric vectors over the
//! consecutive releases (inside the window) in which it exists, in ascending
//! order and ending at `v`. Files that vanished before `v` are not part of
//! the set.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{binarize_label, FileKey, MetricVector, ProjectHistory, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FileLifecycle {
    /// Exists in `v` and in some earlier version.
    Developing,
    /// First appears in `v`.
    Newborn,
    /// Existed earlier, absent from `v`.
    Dead,
}

pub fn classify_file(history: &ProjectHistory, v: &str, key: &FileKey) -> Result<FileLifecycle> {
    let idx = history.version_index(v)?;
    let versions = history.versions();
    let in_current = versions[idx].contains(key);
    let earlier = versions[..idx].iter().any(|s| s.contains(key));
    match (in_current, earlier) {
        (true, true) => Ok(FileLifecycle::Developing),
        (true, false) => Ok(FileLifecycle::Newborn),
        (false, true) => Ok(FileLifecycle::Dead),
        (false, false) => Err(Error::FileNeverPresent(key.to_string())),
    }
}

/// Lifecycle counts at one version.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LifecycleSummary {
    pub version: String,
    pub developing: usize,
    pub newborn: usize,
    pub dead: usize,
}

impl LifecycleSummary {
    /// Files present in the version.
    pub fn files(&self) -> usize {
        self.developing + self.newborn
    }

    /// Share of present files that are developing, in percent.
    pub fn developing_percent(&self) -> f64 {
        if self.files() == 0 {
            0.0
        } else {
            100.0 * self.developing as f64 / self.files() as f64
        }
    }
}

pub fn lifecycle_summary(history: &ProjectHistory, v: &str) -> Result<LifecycleSummary> {
    let idx = history.version_index(v)?;
    let versions = history.versions();
    let mut summary = LifecycleSummary {
        version: v.to_string(),
        ..Default::default()
    };
    let mut seen = std::collections::BTreeSet::new();
    for snap in &versions[..=idx] {
        seen.extend(snap.files().keys());
    }
    for key in seen {
        match classify_file(history, v, key)? {
            FileLifecycle::Developing => summary.developing += 1,
            FileLifecycle::Newborn => summary.newborn += 1,
            FileLifecycle::Dead => summary.dead += 1,
        }
    }
    Ok(summary)
}

/// One file's metric sequence ending at the anchor version.
#[derive(Clone, Debug, PartialEq)]
pub struct Hvsm {
    pub key: FileKey,
    pub version_ids: Vec<String>,
    pub sequence: Vec<MetricVector>,
    /// `None` when the anchor's bug labels are withheld.
    pub label: Option<u8>,
    /// Raw bug count at the anchor version.
    pub bug_count: u32,
}

impl Hvsm {
    /// Number of versions covered (T).
    pub fn length(&self) -> usize {
        self.sequence.len()
    }

    /// Metric vector at the anchor version.
    pub fn last(&self) -> &MetricVector {
        self.sequence.last().expect("an HVSM holds at least one version")
    }

    pub fn loc(&self) -> u64 {
        self.last().loc()
    }
}

/// The HVSMs of every file present in one anchor version.
#[derive(Clone, Debug, PartialEq)]
pub struct HvsmSet {
    pub anchor_version: String,
    pub len: usize,
    pub items: Vec<Hvsm>,
}

impl HvsmSet {
    /// Number of files (m).
    pub fn m(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn schema(&self) -> Option<&Schema> {
        self.items.first().map(|h| h.last().schema().as_ref())
    }

    /// Input dimension of every step.
    pub fn input_dim(&self) -> Option<usize> {
        self.items.first().map(|h| h.last().len())
    }

    pub fn mean_length(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().map(Hvsm::length).sum::<usize>() as f64 / self.items.len() as f64
    }

    /// Same set with labels hidden, as seen at prediction time.
    pub fn without_labels(&self) -> HvsmSet {
        let mut out = self.clone();
        for item in &mut out.items {
            item.label = None;
        }
        out
    }

    /// Writes one row per (file, step): file, version, T, step, metrics, label.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["file", "version_id", "T", "step"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if let Some(schema) = self.schema() {
            header.extend(schema.names().iter().cloned());
        }
        header.push("label".into());
        wtr.write_record(&header)?;
        for item in &self.items {
            for (step, (vid, mv)) in item.version_ids.iter().zip(&item.sequence).enumerate() {
                let mut row = vec![
                    item.key.to_string(),
                    vid.clone(),
                    item.length().to_string(),
                    (step + 1).to_string(),
                ];
                row.extend(mv.values().iter().map(|v| v.to_string()));
                row.push(item.label.map(|l| l.to_string()).unwrap_or_default());
                wtr.write_record(&row)?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Builds the HVSM set anchored at `v` over a trailing window of `len`
/// versions. A file missing from some version inside the window keeps only
/// its consecutive run of versions that ends at `v`. Items are ordered by key.
pub fn extract_hvsm_set(history: &ProjectHistory, v: &str, len: usize) -> Result<HvsmSet> {
    if len == 0 {
        return Err(Error::invalid("HVSM window length must be at least 1"));
    }
    let idx = history.version_index(v)?;
    let versions = history.versions();
    let window_start = (idx + 1).saturating_sub(len);
    let anchor = &versions[idx];

    let items = anchor
        .files()
        .keys()
        .map(|key| {
            let mut first = idx;
            while first > window_start && versions[first - 1].contains(key) {
                first -= 1;
            }
            let span = &versions[first..=idx];
            let bug_count = anchor.bug_count(key);
            Hvsm {
                key: key.clone(),
                version_ids: span.iter().map(|s| s.version_id().to_string()).collect(),
                sequence: span
                    .iter()
                    .map(|s| s.metrics(key).expect("presence checked").clone())
                    .collect(),
                label: Some(binarize_label(bug_count)),
                bug_count,
            }
        })
        .collect();

    Ok(HvsmSet {
        anchor_version: v.to_string(),
        len,
        items,
    })
}

/// Window covering every version up to and including `v`.
pub fn full_window(history: &ProjectHistory, v: &str) -> Result<usize> {
    Ok(history.version_index(v)? + 1)
}

/// Per-dimension z-score parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const MIN_STD: f64 = 1e-12;

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fits population mean/std over `rows`. Near-constant dimensions get std 1.
    pub fn fit_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        for row in &rows {
            if count == 0 {
                sum = vec![0.0; row.len()];
                sum_sq = vec![0.0; row.len()];
            } else if row.len() != sum.len() {
                return Err(Error::DimensionMismatch {
                    expected: sum.len(),
                    actual: row.len(),
                });
            }
            for (s, x) in sum.iter_mut().zip(row.iter()) {
                *s += x;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::invalid("cannot fit a normalizer on an empty set"));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        // two-pass variance
        for row in &rows {
            for ((acc, x), m) in sum_sq.iter_mut().zip(row.iter()).zip(&mean) {
                *acc += (x - m) * (x - m);
            }
        }
        let std = sum_sq
            .iter()
            .map(|ss| {
                let sd = (ss / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn transform_vector(&self, mv: &MetricVector) -> Result<MetricVector> {
        Ok(mv.rescaled(self.transform(mv.values())?))
    }
}

/// Fits over every step of every sequence in `train`.
pub fn fit_normalizer(train: &HvsmSet) -> Result<Normalizer> {
    Normalizer::fit_rows(
        train
            .items
            .iter()
            .flat_map(|h| h.sequence.iter().map(MetricVector::values)),
    )
}

pub fn apply_normalizer(n: &Normalizer, s: &HvsmSet) -> Result<HvsmSet> {
    if let Some(dim) = s.input_dim() {
        if dim != n.dim() {
            return Err(Error::SchemaMismatch(format!(
                "normalizer has {} dimensions, set has {dim}",
                n.dim()
            )));
        }
    }
    let items = s
        .items
        .iter()
        .map(|h| {
            Ok(Hvsm {
                sequence: h
                    .sequence
                    .iter()
                    .map(|mv| n.transform_vector(mv))
                    .collect::<Result<_>>()?,
                ..h.clone()
            })
        })
        .collect::<Result<_>>()?;
    Ok(HvsmSet {
        anchor_version: s.anchor_version.clone(),
        len: s.len,
        items,
    })
}
