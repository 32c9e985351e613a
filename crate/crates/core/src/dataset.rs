//! Per-version metric tables, bug labels and the process metrics derived
//! from line churn.
//!
//! A [`ProjectHistory`] is an ordered list of [`VersionSnapshot`]s. Each
//! snapshot maps a [`FileKey`] to the file's [`MetricVector`] in that release
//! together with its bug count. Tables are read from PROMISE-style CSVs:
//! a `name` column holding the class/file identifier, one column per metric
//! and an integer `bug` column.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 20 code metrics of the PROMISE tables, in their customary column order.
pub const CODE_METRICS: [&str; 20] = [
    "wmc", "dit", "noc", "cbo", "rfc", "lcom", "ca", "ce", "npm", "lcom3", "loc", "dam", "moa", "mfa", "cam", "ic",
    "cbm", "amc", "max_cc", "avg_cc",
];

/// Churn metrics appended by [`attach_process_metrics`].
pub const PROCESS_METRICS: [&str; 4] = ["add", "del", "cadd", "cdel"];

pub const LOC_METRIC: &str = "loc";

/// Identity of a file across versions: same name, same path.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FileKey(String);

impl FileKey {
    /// Trims surrounding whitespace and keeps case. Dotted Java class names
    /// are kept verbatim.
    pub fn new(raw: &str) -> Result<Self> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(Error::invalid("empty file key"));
        }
        Ok(FileKey(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for FileKey {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        FileKey::new(&value)
    }
}

impl From<FileKey> for String {
    fn from(key: FileKey) -> String {
        key.0
    }
}

/// Ordered metric names shared by every vector of a table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    names: Vec<String>,
    loc_index: Option<usize>,
}

impl Schema {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|n| n.as_ref().trim().to_string()).collect();
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::invalid("empty metric name in schema"));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("metric `{name}` listed twice")));
            }
        }
        let loc_index = names.iter().position(|n| n.eq_ignore_ascii_case(LOC_METRIC));
        Ok(Schema { names, loc_index })
    }

    pub fn code_metrics() -> Self {
        Schema::new(&CODE_METRICS).expect("static schema is valid")
    }

    /// Returns a new schema with `extra` appended.
    pub fn extended<S: AsRef<str>>(&self, extra: &[S]) -> Result<Self> {
        let mut names = self.names.clone();
        names.extend(extra.iter().map(|s| s.as_ref().to_string()));
        Schema::new(&names)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn loc_index(&self) -> Option<usize> {
        self.loc_index
    }
}

/// One file's metrics in one version.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricVector {
    values: Vec<f64>,
    schema: Arc<Schema>,
    loc: u64,
}

impl MetricVector {
    pub fn new(schema: Arc<Schema>, values: Vec<f64>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("metric `{}` is not finite", schema.names()[i])));
        }
        let loc = match schema.loc_index() {
            Some(i) if values[i] < 0.0 => {
                return Err(Error::invalid("negative lines of code"));
            }
            Some(i) => values[i].round() as u64,
            None => 0,
        };
        Ok(MetricVector { values, schema, loc })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Lines of code; 0 when the schema has no LOC column.
    pub fn loc(&self) -> u64 {
        self.loc
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same file, rescaled values; `loc` stays the raw line count.
    pub(crate) fn rescaled(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        MetricVector {
            values,
            schema: Arc::clone(&self.schema),
            loc: self.loc,
        }
    }

    fn extended(&self, schema: Arc<Schema>, extra: &[f64]) -> Result<Self> {
        let mut values = self.values.clone();
        values.extend_from_slice(extra);
        MetricVector::new(schema, values)
    }
}

/// All files of one release with their metrics and bug counts.
#[derive(Clone, Debug, PartialEq)]
pub struct VersionSnapshot {
    version_id: String,
    schema: Arc<Schema>,
    files: BTreeMap<FileKey, MetricVector>,
    labels: BTreeMap<FileKey, u32>,
}

impl VersionSnapshot {
    pub fn new(
        version_id: impl Into<String>,
        schema: Arc<Schema>,
        files: BTreeMap<FileKey, MetricVector>,
        labels: BTreeMap<FileKey, u32>,
    ) -> Result<Self> {
        let version_id = version_id.into();
        if version_id.trim().is_empty() {
            return Err(Error::invalid("empty version id"));
        }
        for (key, mv) in &files {
            if mv.schema() != &schema {
                return Err(Error::SchemaMismatch(format!(
                    "file `{key}` in version `{version_id}` does not use the snapshot schema"
                )));
            }
        }
        if let Some(key) = labels.keys().find(|k| !files.contains_key(*k)) {
            return Err(Error::UnknownFile {
                version: version_id,
                key: key.to_string(),
            });
        }
        Ok(VersionSnapshot {
            version_id,
            schema,
            files,
            labels,
        })
    }

    pub fn version_id(&self) -> &str {
        &self.version_id
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn files(&self) -> &BTreeMap<FileKey, MetricVector> {
        &self.files
    }

    pub fn contains(&self, key: &FileKey) -> bool {
        self.files.contains_key(key)
    }

    pub fn metrics(&self, key: &FileKey) -> Option<&MetricVector> {
        self.files.get(key)
    }

    /// Bug count of `key`; unlabeled files count as clean.
    pub fn bug_count(&self, key: &FileKey) -> u32 {
        self.labels.get(key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

/// Versions of one project in ascending release order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectHistory {
    name: String,
    versions: Vec<VersionSnapshot>,
}

impl ProjectHistory {
    pub fn new(name: impl Into<String>, versions: Vec<VersionSnapshot>) -> Result<Self> {
        let mut ids = HashSet::new();
        for v in &versions {
            if !ids.insert(v.version_id()) {
                return Err(Error::invalid(format!("version `{}` listed twice", v.version_id())));
            }
        }
        if let Some(first) = versions.first() {
            if let Some(v) = versions.iter().find(|v| v.schema() != first.schema()) {
                return Err(Error::SchemaMismatch(format!(
                    "version `{}` uses a different metric schema",
                    v.version_id()
                )));
            }
        }
        Ok(ProjectHistory {
            name: name.into(),
            versions,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn versions(&self) -> &[VersionSnapshot] {
        &self.versions
    }

    pub fn version_index(&self, version_id: &str) -> Result<usize> {
        self.versions
            .iter()
            .position(|v| v.version_id() == version_id)
            .ok_or_else(|| Error::UnknownVersion(version_id.to_string()))
    }

    pub fn version(&self, version_id: &str) -> Result<&VersionSnapshot> {
        Ok(&self.versions[self.version_index(version_id)?])
    }

    pub fn schema(&self) -> Option<&Arc<Schema>> {
        self.versions.first().map(|v| v.schema())
    }
}

/// Line churn of one file in one version.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessMetrics {
    pub add: u64,
    pub del: u64,
    pub cadd: u64,
    pub cdel: u64,
}

impl ProcessMetrics {
    pub fn as_values(&self) -> [f64; 4] {
        [self.add as f64, self.del as f64, self.cadd as f64, self.cdel as f64]
    }
}

/// Line churn keyed by (version id, file).
pub type ChurnTable = BTreeMap<(String, FileKey), (u64, u64)>;

pub fn binarize_label(bug_count: u32) -> u8 {
    u8::from(bug_count > 0)
}

/// Column names used when reading a metrics table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvColumns {
    pub key: String,
    pub bug: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            key: "name".into(),
            bug: "bug".into(),
        }
    }
}

pub fn parse_metrics_csv<R: Read>(reader: R, version_id: &str, schema: &Arc<Schema>) -> Result<VersionSnapshot> {
    parse_metrics_csv_with(reader, version_id, schema, &CsvColumns::default())
}

/// Reads one metrics table. Columns not named by the schema are ignored.
pub fn parse_metrics_csv_with<R: Read>(
    reader: R,
    version_id: &str,
    schema: &Arc<Schema>,
    columns: &CsvColumns,
) -> Result<VersionSnapshot> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    // PROMISE tables carry two `name` columns (project, then class); the last wins.
    let find_last = |name: &str| {
        header
            .iter()
            .enumerate()
            .filter(|(_, h)| *h == name)
            .map(|(i, _)| i)
            .last()
    };
    let key_col = find_last(&columns.key).ok_or_else(|| Error::MissingColumn(columns.key.clone()))?;
    let bug_col = find_last(&columns.bug).ok_or_else(|| Error::MissingColumn(columns.bug.clone()))?;
    let metric_cols = schema
        .names()
        .iter()
        .map(|m| find_last(m).ok_or_else(|| Error::MissingColumn(m.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut files = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| Error::Parse {
                row,
                column: name.to_string(),
                message: "missing cell".into(),
            })
        };

        let key = FileKey::new(cell(key_col, &columns.key)?).map_err(|e| Error::Parse {
            row,
            column: columns.key.clone(),
            message: e.to_string(),
        })?;

        let mut values = Vec::with_capacity(metric_cols.len());
        for (&col, name) in metric_cols.iter().zip(schema.names()) {
            let raw = cell(col, name)?;
            let value: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.clone(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            values.push(value);
        }

        let raw_bug = cell(bug_col, &columns.bug)?;
        let bugs: u32 = raw_bug.parse().map_err(|_| Error::Parse {
            row,
            column: columns.bug.clone(),
            message: format!("`{raw_bug}` is not a non-negative integer"),
        })?;

        let mv = MetricVector::new(Arc::clone(schema), values).map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if files.insert(key.clone(), mv).is_some() {
            return Err(Error::DuplicateKey {
                key: key.to_string(),
                row,
            });
        }
        labels.insert(key, bugs);
    }

    VersionSnapshot::new(version_id, Arc::clone(schema), files, labels)
}

/// Writes a snapshot in the layout read by [`parse_metrics_csv`].
pub fn write_metrics_csv<W: Write>(snapshot: &VersionSnapshot, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["name".to_string()];
    header.extend(snapshot.schema().names().iter().cloned());
    header.push("bug".into());
    wtr.write_record(&header)?;
    for (key, mv) in snapshot.files() {
        let mut row = vec![key.to_string()];
        row.extend(mv.values().iter().map(|v| v.to_string()));
        row.push(snapshot.bug_count(key).to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Reads a churn table with columns `version,name,add,del`.
pub fn parse_process_csv<R: Read>(reader: R) -> Result<ChurnTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (vcol, ncol, acol, dcol) = (col("version")?, col("name")?, col("add")?, col("del")?);

    let mut table = ChurnTable::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let get = |c: usize, name: &str| {
            record.get(c).ok_or_else(|| Error::Parse {
                row,
                column: name.to_string(),
                message: "missing cell".into(),
            })
        };
        let count = |c: usize, name: &str| -> Result<u64> {
            let raw = get(c, name)?;
            raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("`{raw}` is not a non-negative integer"),
            })
        };
        let version = get(vcol, "version")?.to_string();
        let key = FileKey::new(get(ncol, "name")?).map_err(|e| Error::Parse {
            row,
            column: "name".into(),
            message: e.to_string(),
        })?;
        let churn = (count(acol, "add")?, count(dcol, "del")?);
        if table.insert((version, key.clone()), churn).is_some() {
            return Err(Error::DuplicateKey {
                key: key.to_string(),
                row,
            });
        }
    }
    Ok(table)
}

/// Per-(version, file) process metrics accumulated in release order.
pub fn process_metrics(
    history: &ProjectHistory,
    churn: &ChurnTable,
) -> Result<BTreeMap<(String, FileKey), ProcessMetrics>> {
    for (version, key) in churn.keys() {
        let snap = history.version(version)?;
        if !snap.contains(key) {
            return Err(Error::UnknownFile {
                version: version.clone(),
                key: key.to_string(),
            });
        }
    }

    let mut running: BTreeMap<&FileKey, (u64, u64)> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for snap in history.versions() {
        for key in snap.files().keys() {
            let (add, del) = churn
                .get(&(snap.version_id().to_string(), key.clone()))
                .copied()
                .unwrap_or((0, 0));
            let acc = running.entry(key).or_insert((0, 0));
            acc.0 += add;
            acc.1 += del;
            out.insert(
                (snap.version_id().to_string(), key.clone()),
                ProcessMetrics {
                    add,
                    del,
                    cadd: acc.0,
                    cdel: acc.1,
                },
            );
        }
    }
    Ok(out)
}

/// Extends every metric vector with `[add, del, cadd, cdel]`.
pub fn attach_process_metrics(history: &ProjectHistory, churn: &ChurnTable) -> Result<ProjectHistory> {
    let per_file = process_metrics(history, churn)?;
    let Some(base) = history.schema() else {
        return Ok(history.clone());
    };
    let schema = Arc::new(base.extended(&PROCESS_METRICS)?);

    let mut versions = Vec::with_capacity(history.versions().len());
    for snap in history.versions() {
        let mut files = BTreeMap::new();
        for (key, mv) in snap.files() {
            let pm = per_file[&(snap.version_id().to_string(), key.clone())];
            files.insert(key.clone(), mv.extended(Arc::clone(&schema), &pm.as_values())?);
        }
        versions.push(VersionSnapshot::new(
            snap.version_id(),
            Arc::clone(&schema),
            files,
            snap.labels.clone(),
        )?);
    }
    ProjectHistory::new(history.name(), versions)
}

/// Which metric family feeds the classifiers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricSet {
    #[default]
    Code,
    #[serde(rename = "code+process")]
    CodeAndProcess,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestVersion {
    pub id: String,
    pub metrics: PathBuf,
    #[serde(default)]
    pub process: Option<PathBuf>,
}

/// A project and its release-ordered metric tables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectManifest {
    pub name: String,
    #[serde(rename = "version")]
    pub versions: Vec<ManifestVersion>,
    /// Metric column names; defaults to [`CODE_METRICS`].
    #[serde(default)]
    pub metrics: Option<Vec<String>>,
    #[serde(default)]
    pub columns: CsvColumns,
}

impl ProjectManifest {
    /// Loads every table, resolving relative paths against `base_dir`.
    pub fn load(&self, base_dir: &Path, metric_set: MetricSet) -> Result<ProjectHistory> {
        let schema = Arc::new(match &self.metrics {
            Some(names) => Schema::new(names)?,
            None => Schema::code_metrics(),
        });
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let mut versions = Vec::with_capacity(self.versions.len());
        let mut churn = ChurnTable::new();
        let mut known: BTreeSet<&str> = BTreeSet::new();
        for entry in &self.versions {
            known.insert(&entry.id);
            let path = resolve(&entry.metrics);
            let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let snap = parse_metrics_csv_with(file, &entry.id, &schema, &self.columns)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            versions.push(snap);

            if metric_set == MetricSet::CodeAndProcess {
                if let Some(p) = &entry.process {
                    let path = resolve(p);
                    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                    let table =
                        parse_process_csv(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    churn.extend(table);
                }
            }
        }

        let history = ProjectHistory::new(&self.name, versions)?;
        match metric_set {
            MetricSet::Code => Ok(history),
            MetricSet::CodeAndProcess => attach_process_metrics(&history, &churn),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_schema() -> Arc<Schema> {
        Arc::new(Schema::new(&["loc", "wmc"]).unwrap())
    }

    fn code_row(name: &str, bug: u32) -> String {
        let metrics: Vec<String> = (0..20).map(|i| (i + 1).to_string()).collect();
        format!("{name},{},{bug}", metrics.join(","))
    }

    fn code_header() -> String {
        format!("name,{},bug", CODE_METRICS.join(","))
    }

    #[test]
    fn parses_single_row_and_keeps_bug_count() {
        let csv = format!("{}\n{}\n", code_header(), code_row("a/B.java", 3));
        let schema = Arc::new(Schema::code_metrics());
        let snap = parse_metrics_csv(csv.as_bytes(), "1.0", &schema).unwrap();
        let key = FileKey::new("a/B.java").unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap.bug_count(&key), 3);
        // loc is the 11th metric -> value 11
        assert_eq!(snap.metrics(&key).unwrap().loc(), 11);
    }

    #[test]
    fn header_only_gives_empty_snapshot() {
        let csv = format!("{}\n", code_header());
        let snap = parse_metrics_csv(csv.as_bytes(), "1.0", &Arc::new(Schema::code_metrics())).unwrap();
        assert!(snap.is_empty());
    }

    #[test]
    fn nan_cell_is_rejected_with_location() {
        let csv = "name,loc,wmc,bug\nA,10,NaN,0\n";
        let err = parse_metrics_csv(csv.as_bytes(), "1", &small_schema()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "wmc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_missing_columns() {
        let csv = "name,loc,wmc,bug\nA,10,x,0\n";
        assert!(matches!(
            parse_metrics_csv(csv.as_bytes(), "1", &small_schema()),
            Err(Error::Parse { .. })
        ));
        let csv = "name,loc,bug\nA,10,0\n";
        assert!(matches!(
            parse_metrics_csv(csv.as_bytes(), "1", &small_schema()),
            Err(Error::MissingColumn(c)) if c == "wmc"
        ));
        let csv = "name,loc,wmc,bug\nA,10,1,-1\n";
        assert!(parse_metrics_csv(csv.as_bytes(), "1", &small_schema()).is_err());
        let csv = "name,loc,wmc,bug\nA,10,1\n";
        assert!(parse_metrics_csv(csv.as_bytes(), "1", &small_schema()).is_err());
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let csv = "name,loc,wmc,bug\nA,10,1,0\n A ,3,1,1\n";
        assert!(matches!(
            parse_metrics_csv(csv.as_bytes(), "1", &small_schema()),
            Err(Error::DuplicateKey { row: 2, .. })
        ));
    }

    #[test]
    fn promise_layout_uses_last_name_column() {
        let csv = "name,version,name,loc,wmc,bug\nant,1.3,org.apache.Foo,10,1,2\n";
        let snap = parse_metrics_csv(csv.as_bytes(), "1.3", &small_schema()).unwrap();
        assert!(snap.contains(&FileKey::new("org.apache.Foo").unwrap()));
    }

    #[test]
    fn binarize() {
        assert_eq!(binarize_label(0), 0);
        assert_eq!(binarize_label(1), 1);
        assert_eq!(binarize_label(7), 1);
        assert_eq!(binarize_label(u32::from(binarize_label(7))), 1);
    }

    fn three_version_history() -> ProjectHistory {
        let schema = small_schema();
        let versions = ["1", "2", "3"]
            .iter()
            .map(|id| {
                let mut files = BTreeMap::new();
                files.insert(
                    FileKey::new("f").unwrap(),
                    MetricVector::new(Arc::clone(&schema), vec![100.0, 1.0]).unwrap(),
                );
                if *id == "3" {
                    files.insert(
                        FileKey::new("g").unwrap(),
                        MetricVector::new(Arc::clone(&schema), vec![50.0, 1.0]).unwrap(),
                    );
                }
                VersionSnapshot::new(*id, Arc::clone(&schema), files, BTreeMap::new()).unwrap()
            })
            .collect();
        ProjectHistory::new("p", versions).unwrap()
    }

    #[test]
    fn process_metrics_accumulate() {
        let h = three_version_history();
        let f = FileKey::new("f").unwrap();
        let g = FileKey::new("g").unwrap();
        let mut churn = ChurnTable::new();
        for (v, add, del) in [("1", 10, 2), ("2", 5, 0), ("3", 0, 1)] {
            churn.insert((v.into(), f.clone()), (add, del));
        }
        churn.insert(("3".into(), g.clone()), (100, 0));

        let out = attach_process_metrics(&h, &churn).unwrap();
        let tail = |v: &str, k: &FileKey| out.version(v).unwrap().metrics(k).unwrap().values()[2..].to_vec();
        assert_eq!(tail("1", &f), vec![10.0, 2.0, 10.0, 2.0]);
        assert_eq!(tail("2", &f), vec![5.0, 0.0, 15.0, 2.0]);
        assert_eq!(tail("3", &f), vec![0.0, 1.0, 15.0, 3.0]);
        // newborn file: cumulative equals its first churn
        assert_eq!(tail("3", &g), vec![100.0, 0.0, 100.0, 0.0]);
        assert_eq!(out.schema().unwrap().len(), 6);
        assert_eq!(out.version("3").unwrap().metrics(&f).unwrap().loc(), 100);
    }

    #[test]
    fn process_metrics_unknown_references() {
        let h = three_version_history();
        let mut churn = ChurnTable::new();
        churn.insert(("9".into(), FileKey::new("f").unwrap()), (1, 1));
        assert!(matches!(
            attach_process_metrics(&h, &churn),
            Err(Error::UnknownVersion(_))
        ));
        let mut churn = ChurnTable::new();
        churn.insert(("1".into(), FileKey::new("g").unwrap()), (1, 1));
        assert!(matches!(
            attach_process_metrics(&h, &churn),
            Err(Error::UnknownFile { .. })
        ));
    }

    #[test]
    fn process_csv_parsing() {
        let csv = "version,name,add,del\n1,f,10,2\n2,f,5,0\n";
        let t = parse_process_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[&("1".to_string(), FileKey::new("f").unwrap())], (10, 2));
        assert!(parse_process_csv("version,name,add\n".as_bytes()).is_err());
    }

    #[test]
    fn history_rejects_duplicate_versions() {
        let h = three_version_history();
        let mut v = h.versions().to_vec();
        v.push(v[0].clone());
        assert!(ProjectHistory::new("p", v).is_err());
    }

    #[test]
    fn file_key_normalization() {
        assert_eq!(FileKey::new("  a/B.java ").unwrap().as_str(), "a/B.java");
        assert_ne!(FileKey::new("a/b.java").unwrap(), FileKey::new("a/B.java").unwrap());
        assert!(FileKey::new("   ").is_err());
    }
}
