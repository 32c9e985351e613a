//! Within-project experiment driver: config, runs, aggregation, report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind, BaselineModel, DEFAULT_K};
use crate::dataset::{MetricSet, ProjectHistory, ProjectManifest};
use crate::effort_eval::{evaluate, CeEvaluation, CeReport, ScoredFile, REPORT_METRICS};
use crate::error::{Error, Result};
use crate::history::{extract_hvsm_set, full_window, lifecycle_summary, HvsmSet};
use crate::rnn::{Hyperparams, RnnModel};
use crate::stats::{replicate, scott_knott, win_tie_loss, SkGrouping, WtlCounts};

/// Name of the recurrent technique in reports.
pub const RNN: &str = "RNN";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Labels among `LR`, `NB`, `KNN`, `NN`, in report order.
    #[serde(default = "default_techniques")]
    pub techniques: Vec<String>,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    /// Gradient-descent settings for logistic regression (`hidden_size` unused).
    #[serde(default)]
    pub lr: Hyperparams,
    /// Feedforward network settings; the seed comes from the experiment.
    #[serde(default)]
    pub nn: Hyperparams,
}

fn default_techniques() -> Vec<String> {
    ["LR", "NB", "KNN", "NN"].map(String::from).to_vec()
}

fn default_k() -> usize {
    DEFAULT_K
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            techniques: default_techniques(),
            knn_k: DEFAULT_K,
            lr: Hyperparams::default(),
            nn: Hyperparams::default(),
        }
    }
}

impl BaselineConfig {
    pub fn kinds(&self) -> Result<Vec<BaselineKind>> {
        self.techniques
            .iter()
            .map(|t| match t.to_ascii_uppercase().as_str() {
                "LR" => Ok(BaselineKind::LogisticRegression),
                "NB" => Ok(BaselineKind::GaussianNb),
                "KNN" => Ok(BaselineKind::Knn { k: self.knn_k }),
                "NN" => Ok(BaselineKind::FeedforwardNn),
                other => Err(Error::Config(format!("unknown baseline `{other}`"))),
            })
            .collect()
    }

    fn hyperparams(&self, kind: BaselineKind) -> &Hyperparams {
        match kind {
            BaselineKind::FeedforwardNn => &self.nn,
            _ => &self.lr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    #[serde(flatten)]
    pub manifest: ProjectManifest,
    /// Defaults to the second-to-last version.
    #[serde(default)]
    pub train_version: Option<String>,
    /// Defaults to the last version.
    #[serde(default)]
    pub test_version: Option<String>,
}

impl ProjectConfig {
    /// `(train, test)` version ids.
    pub fn split(&self) -> Result<(String, String)> {
        let ids: Vec<&str> = self.manifest.versions.iter().map(|v| v.id.as_str()).collect();
        if ids.len() < 2 {
            return Err(Error::Config(format!(
                "project `{}` needs at least two versions",
                self.manifest.name
            )));
        }
        let train = self
            .train_version
            .clone()
            .unwrap_or_else(|| ids[ids.len() - 2].to_string());
        let test = self
            .test_version
            .clone()
            .unwrap_or_else(|| ids[ids.len() - 1].to_string());
        let pos = |v: &str| {
            ids.iter()
                .position(|id| *id == v)
                .ok_or_else(|| Error::UnknownVersion(v.to_string()))
        };
        if pos(&train)? >= pos(&test)? {
            return Err(Error::Config(format!(
                "project `{}`: train version `{train}` must precede test version `{test}`",
                self.manifest.name
            )));
        }
        Ok((train, test))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// HVSM window; all versions up to the anchor when absent.
    #[serde(default)]
    pub len: Option<usize>,
    #[serde(default)]
    pub metric_set: MetricSet,
    /// Scott-Knott over every run instead of per-project means.
    #[serde(default)]
    pub pool_runs: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub rnn: Hyperparams,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default, rename = "project")]
    pub projects: Vec<ProjectConfig>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_repeats() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.len == Some(0) {
            return Err(Error::Config("len must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if self.baselines.knn_k == 0 {
            return Err(Error::Config("knn_k must be at least 1".into()));
        }
        self.rnn.validate()?;
        self.baselines.nn.validate()?;
        self.baselines.kinds()?;
        let mut names = std::collections::BTreeSet::new();
        for p in &self.projects {
            if !names.insert(&p.manifest.name) {
                return Err(Error::Config(format!("duplicate project `{}`", p.manifest.name)));
            }
            p.split()?;
        }
        Ok(())
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        if self.output_dir.is_absolute() {
            self.output_dir.clone()
        } else {
            self.base_dir.join(&self.output_dir)
        }
    }

    /// Techniques in report order.
    pub fn techniques(&self) -> Result<Vec<String>> {
        let mut out = vec![RNN.to_string()];
        out.extend(self.baselines.kinds()?.iter().map(|k| k.label().to_string()));
        Ok(out)
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

/// Size and lifecycle make-up of one HVSM set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub version: String,
    pub files: usize,
    pub developing: usize,
    pub newborn: usize,
    pub dead: usize,
    pub defective: usize,
    pub percent_developing: f64,
    pub mean_length: f64,
}

fn summarize(history: &ProjectHistory, set: &HvsmSet) -> Result<SetSummary> {
    let life = lifecycle_summary(history, &set.anchor_version)?;
    Ok(SetSummary {
        version: set.anchor_version.clone(),
        files: set.m(),
        developing: life.developing,
        newborn: life.newborn,
        dead: life.dead,
        defective: set.items.iter().filter(|h| h.label == Some(1)).count(),
        percent_developing: life.developing_percent(),
        mean_length: set.mean_length(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectResult {
    pub project: String,
    pub train: SetSummary,
    pub test: SetSummary,
    /// Technique → one report per repeat.
    pub runs: BTreeMap<String, Vec<CeReport>>,
    /// Technique → metric → mean over repeats.
    pub means: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectError {
    pub project: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Metric → technique → mean over projects.
    pub means: BTreeMap<String, BTreeMap<String, f64>>,
    /// Metric → technique → average rank over projects (1 = best).
    pub average_ranks: BTreeMap<String, BTreeMap<String, f64>>,
    pub scott_knott: BTreeMap<String, SkGrouping>,
    /// Metric → baseline → RNN's record against it over projects.
    pub win_tie_loss: BTreeMap<String, BTreeMap<String, WtlCounts>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub techniques: Vec<String>,
    pub repeats: usize,
    pub seed: u64,
    pub projects: Vec<ProjectResult>,
    pub errors: Vec<ProjectError>,
    pub aggregates: Aggregates,
    /// `project_technique` → first-repeat CE curve points; not part of the JSON.
    #[serde(skip)]
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

struct ProjectRun {
    result: ProjectResult,
    curves: Vec<(String, Vec<(f64, f64)>)>,
}

fn scored(set: &HvsmSet, scores: &[f64]) -> Result<Vec<ScoredFile>> {
    set.items
        .iter()
        .zip(scores)
        .map(|(h, &s)| ScoredFile::new(h.key.clone(), s, h.loc(), h.bug_count))
        .collect()
}

fn score_baseline(m: &BaselineModel, test: &HvsmSet) -> Result<Vec<f64>> {
    test.items.iter().map(|h| m.predict(h.last())).collect()
}

/// CE report plus the model curve for one scored test set.
fn assess(files: &[ScoredFile]) -> Result<(CeReport, Vec<(f64, f64)>)> {
    let report = evaluate(files)?;
    let curve = CeEvaluation::new(files)?.model.points;
    Ok((report, curve))
}

fn run_project(cfg: &ExperimentConfig, project: &ProjectConfig) -> Result<ProjectRun> {
    let (train_v, test_v) = project.split()?;
    let history = project.manifest.load(&cfg.base_dir, cfg.metric_set)?;
    let window = |v: &str| -> Result<usize> {
        let full = full_window(&history, v)?;
        Ok(cfg.len.map_or(full, |l| l.min(full)))
    };
    let train = extract_hvsm_set(&history, &train_v, window(&train_v)?)?;
    let test = extract_hvsm_set(&history, &test_v, window(&test_v)?)?;
    if train.is_empty() {
        return Err(Error::invalid(format!("no files in train version `{train_v}`")));
    }
    if test.is_empty() {
        return Err(Error::invalid(format!("no files in test version `{test_v}`")));
    }

    let mut runs: BTreeMap<String, Vec<CeReport>> = BTreeMap::new();
    let mut curves = Vec::new();

    let rnn_runs: Vec<(CeReport, Vec<(f64, f64)>)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let h = Hyperparams {
                seed: cfg.repeat_seed(r),
                ..cfg.rnn.clone()
            };
            let model = RnnModel::fit(&train, &h)?;
            assess(&scored(&test, &model.predict_set(&test)?)?)
        })
        .collect::<Result<_>>()?;
    curves.push((RNN.to_string(), rnn_runs[0].1.clone()));
    runs.insert(RNN.to_string(), rnn_runs.into_iter().map(|(r, _)| r).collect());

    let features = baselines::anchor_features(&train)?;
    for kind in cfg.baselines.kinds()? {
        let base = cfg.baselines.hyperparams(kind);
        let fit_and_score = |seed: u64| -> Result<(CeReport, Vec<(f64, f64)>)> {
            let h = Hyperparams { seed, ..base.clone() };
            let model = baselines::train_baseline(kind, &features, &h)?;
            assess(&scored(&test, &score_baseline(&model, &test)?)?)
        };
        let label = kind.label().to_string();
        let reports: Vec<(CeReport, Vec<(f64, f64)>)> = if kind.is_random() {
            (0..cfg.repeats)
                .into_par_iter()
                .map(|r| fit_and_score(cfg.repeat_seed(r)))
                .collect::<Result<_>>()?
        } else {
            let once = fit_and_score(cfg.seed)?;
            vec![once; cfg.repeats]
        };
        curves.push((label.clone(), reports[0].1.clone()));
        runs.insert(label, reports.into_iter().map(|(r, _)| r).collect());
    }

    let means = runs
        .iter()
        .map(|(t, reports)| (t.clone(), metric_means(reports)))
        .collect();
    Ok(ProjectRun {
        result: ProjectResult {
            project: project.manifest.name.clone(),
            train: summarize(&history, &train)?,
            test: summarize(&history, &test)?,
            runs,
            means,
        },
        curves,
    })
}

fn metric_means(reports: &[CeReport]) -> BTreeMap<String, f64> {
    REPORT_METRICS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mean = reports.iter().map(|r| r.values()[i]).sum::<f64>() / reports.len() as f64;
            (name.to_string(), mean)
        })
        .collect()
}

/// Runs every project and aggregates the completed ones. Per-project failures
/// are recorded in `errors`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let techniques = cfg.techniques()?;
    let outcomes: Vec<Result<ProjectRun>> = cfg.projects.par_iter().map(|p| run_project(cfg, p)).collect();

    let mut projects = Vec::new();
    let mut errors = Vec::new();
    let mut curves = BTreeMap::new();
    for (p, outcome) in cfg.projects.iter().zip(outcomes) {
        match outcome {
            Ok(run) => {
                for (t, pts) in run.curves {
                    curves.insert(format!("{}_{t}", p.manifest.name), pts);
                }
                projects.push(run.result);
            }
            Err(e) => errors.push(ProjectError {
                project: p.manifest.name.clone(),
                message: e.to_string(),
            }),
        }
    }

    let aggregates = aggregate(&techniques, &projects, cfg.alpha, cfg.pool_runs)?;
    Ok(ExperimentReport {
        techniques,
        repeats: cfg.repeats,
        seed: cfg.seed,
        projects,
        errors,
        aggregates,
        curves,
    })
}

/// Mean rank per technique across projects. Within each project techniques
/// are ranked 1 = highest value, ties sharing the average rank.
pub fn average_rank(table: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for row in table {
        let mut entries: Vec<(&String, f64)> = row.iter().map(|(t, v)| (t, *v)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut i = 0;
        while i < entries.len() {
            let mut j = i;
            while j + 1 < entries.len() && entries[j + 1].1 == entries[i].1 {
                j += 1;
            }
            let rank = (i + j) as f64 / 2.0 + 1.0;
            for (t, _) in &entries[i..=j] {
                *totals.entry((*t).clone()).or_default() += rank;
            }
            i = j + 1;
        }
    }
    let n = table.len() as f64;
    totals.into_iter().map(|(t, s)| (t, s / n)).collect()
}

/// Means, average ranks, Scott-Knott groups and RNN Win/Tie/Loss records.
pub fn aggregate(techniques: &[String], projects: &[ProjectResult], alpha: f64, pool_runs: bool) -> Result<Aggregates> {
    let mut agg = Aggregates::default();
    if projects.is_empty() {
        return Ok(agg);
    }
    let n = projects.len() as f64;
    for metric in REPORT_METRICS {
        let per_project: Vec<BTreeMap<String, f64>> = projects
            .iter()
            .map(|p| techniques.iter().map(|t| (t.clone(), p.means[t][metric])).collect())
            .collect();

        let means = techniques
            .iter()
            .map(|t| (t.clone(), per_project.iter().map(|row| row[t]).sum::<f64>() / n))
            .collect();
        agg.means.insert(metric.to_string(), means);
        agg.average_ranks.insert(metric.to_string(), average_rank(&per_project));

        let idx = REPORT_METRICS.iter().position(|m| *m == metric).unwrap();
        let runs_of = |p: &ProjectResult, t: &str| -> Vec<f64> { p.runs[t].iter().map(|r| r.values()[idx]).collect() };
        let sk_input: BTreeMap<String, Vec<f64>> = techniques
            .iter()
            .map(|t| {
                let values = if pool_runs {
                    projects.iter().flat_map(|p| runs_of(p, t)).collect()
                } else {
                    per_project.iter().map(|row| row[t]).collect()
                };
                (t.clone(), values)
            })
            .collect();
        agg.scott_knott
            .insert(metric.to_string(), scott_knott(&sk_input, alpha)?);

        let mut wtl = BTreeMap::new();
        if techniques.iter().any(|t| t == RNN) {
            for t in techniques.iter().filter(|t| *t != RNN) {
                let mut counts = WtlCounts::default();
                for p in projects {
                    let rnn = runs_of(p, RNN);
                    let other = runs_of(p, t);
                    // Deterministic baselines already hold `repeats` copies.
                    let other = if other.len() == rnn.len() {
                        other
                    } else {
                        replicate(other[0], rnn.len())
                    };
                    counts.add(win_tie_loss(&rnn, &other)?);
                }
                wtl.insert(t.clone(), counts);
            }
        }
        agg.win_tie_loss.insert(metric.to_string(), wtl);
    }
    Ok(agg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `summary.csv`, `datasets.csv`, `sk_groups.txt`,
/// `win_tie_loss.csv` and `ce_curves/*.csv` into `dir`.
pub fn emit_report(r: &ExperimentReport, dir: &Path) -> Result<()> {
    let curves_dir = dir.join("ce_curves");
    std::fs::create_dir_all(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
    write(&dir.join("report.json"), &r.to_json()?)?;

    let mut summary = format!("project,technique,{}\n", REPORT_METRICS.join(","));
    let mut row = |label: &str, t: &str, values: &dyn Fn(&str) -> f64| {
        let cells: Vec<String> = REPORT_METRICS.iter().map(|m| format!("{:.3}", values(m))).collect();
        writeln!(summary, "{label},{t},{}", cells.join(",")).unwrap();
    };
    for p in &r.projects {
        for t in &r.techniques {
            row(&p.project, t, &|m| p.means[t][m]);
        }
    }
    if !r.projects.is_empty() {
        for t in &r.techniques {
            row("Avg.", t, &|m| r.aggregates.means[m][t]);
        }
        for t in &r.techniques {
            row("AR", t, &|m| r.aggregates.average_ranks[m][t]);
        }
    }
    write(&dir.join("summary.csv"), &summary)?;

    let mut datasets = String::from(
        "project,train_version,train_files,train_defective,train_pct_df,train_mean_len,\
         test_version,test_files,test_defective,test_pct_df,test_mean_len\n",
    );
    for p in &r.projects {
        let (a, b) = (&p.train, &p.test);
        writeln!(
            datasets,
            "{},{},{},{},{:.1},{:.3},{},{},{},{:.1},{:.3}",
            p.project,
            a.version,
            a.files,
            a.defective,
            a.percent_developing,
            a.mean_length,
            b.version,
            b.files,
            b.defective,
            b.percent_developing,
            b.mean_length
        )
        .unwrap();
    }
    write(&dir.join("datasets.csv"), &datasets)?;

    let mut sk = String::new();
    for (metric, grouping) in &r.aggregates.scott_knott {
        writeln!(sk, "{metric}").unwrap();
        for (i, group) in grouping.ranks.iter().enumerate() {
            let members: Vec<String> = group
                .iter()
                .map(|t| format!("{t} ({:.3})", grouping.means[t]))
                .collect();
            writeln!(sk, "  {}: {}", i + 1, members.join(", ")).unwrap();
        }
    }
    write(&dir.join("sk_groups.txt"), &sk)?;

    let mut wtl = String::from("metric,baseline,win,tie,loss\n");
    for (metric, rows) in &r.aggregates.win_tie_loss {
        for (t, c) in rows {
            writeln!(wtl, "{metric},{t},{},{},{}", c.wins, c.ties, c.losses).unwrap();
        }
    }
    write(&dir.join("win_tie_loss.csv"), &wtl)?;

    for (name, points) in &r.curves {
        let mut csv = String::from("loc_fraction,bug_fraction\n");
        for (x, y) in points {
            writeln!(csv, "{x},{y}").unwrap();
        }
        write(&curves_dir.join(format!("{name}.csv")), &csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(t, v)| (t.to_string(), *v)).collect()
    }

    #[test]
    fn single_technique_ranks_first() {
        let ar = average_rank(&[row(&[("A", 0.3)]), row(&[("A", 0.9)])]);
        assert_eq!(ar["A"], 1.0);
    }

    #[test]
    fn five_four_split() {
        let mut table = vec![row(&[("A", 0.9), ("B", 0.1)]); 5];
        table.extend(vec![row(&[("A", 0.1), ("B", 0.9)]); 4]);
        let ar = average_rank(&table);
        assert!((ar["A"] - 13.0 / 9.0).abs() < 1e-12);
        assert!((ar["B"] - 14.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn ties_share_ranks() {
        let ar = average_rank(&[row(&[("A", 0.5), ("B", 0.5), ("C", 0.1)])]);
        assert_eq!(ar["A"], 1.5);
        assert_eq!(ar["B"], 1.5);
        assert_eq!(ar["C"], 3.0);
    }

    #[test]
    fn config_defaults_and_split() {
        let text = r#"
            [[project]]
            name = "toy"
            [[project.version]]
            id = "1.0"
            metrics = "a.csv"
            [[project.version]]
            id = "1.1"
            metrics = "b.csv"
            [[project.version]]
            id = "2.0"
            metrics = "c.csv"
        "#;
        let cfg = ExperimentConfig::from_toml(text, Path::new("/data")).unwrap();
        assert_eq!(cfg.repeats, 10);
        assert_eq!(cfg.len, None);
        assert_eq!(cfg.techniques().unwrap(), ["RNN", "LR", "NB", "KNN", "NN"]);
        assert_eq!(cfg.projects[0].split().unwrap(), ("1.1".to_string(), "2.0".to_string()));
        assert_eq!(cfg.resolved_output_dir(), Path::new("/data/results"));
    }

    #[test]
    fn rejects_reversed_versions() {
        let text = r#"
            [[project]]
            name = "toy"
            train_version = "2.0"
            test_version = "1.0"
            [[project.version]]
            id = "1.0"
            metrics = "a.csv"
            [[project.version]]
            id = "2.0"
            metrics = "b.csv"
        "#;
        assert!(ExperimentConfig::from_toml(text, Path::new(".")).is_err());
    }

    #[test]
    fn rejects_zero_repeats_and_unknown_baseline() {
        assert!(ExperimentConfig::from_toml("repeats = 0", Path::new(".")).is_err());
        assert!(ExperimentConfig::from_toml("[baselines]\ntechniques = [\"RF\"]", Path::new(".")).is_err());
    }

    #[test]
    fn empty_report_has_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml("repeats = 1", dir.path()).unwrap();
        let r = run_experiment(&cfg).unwrap();
        emit_report(&r, dir.path()).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1);
        let wtl = std::fs::read_to_string(dir.path().join("win_tie_loss.csv")).unwrap();
        assert_eq!(wtl, "metric,baseline,win,tie,loss\n");
        let back = ExperimentReport::read_json(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, r);
    }
}
