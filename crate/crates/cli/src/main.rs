use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hvsm::dataset::FileKey;
use hvsm::effort_eval::{evaluate, CeEvaluation, ScoredFile};
use hvsm::experiment::{average_rank, emit_report, run_experiment, ExperimentConfig, ProjectConfig};
use hvsm::rnn::{gradient_check, Hyperparams, REL_ERR_FLOOR};
use hvsm::stats::{replicate, scott_knott, win_tie_loss, WtlCounts};
use hvsm::synthetic::{trend_history, write_project, TrendSpec};

#[derive(Parser)]
#[command(
    name = "hvsm",
    version,
    about = "Defect prediction from historical version sequences of metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare BPTT gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 4)]
        input: usize,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sweep hidden {1,3,8} × input {1,4,24} × steps {1,2,5} instead.
        #[arg(long)]
        grid: bool,
    },
    /// CE/ACC/AUC for externally produced scores (columns name,score,loc,bugs[,label]).
    Eval {
        scores: PathBuf,
        /// Also write the model's CE curve to this CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Scott-Knott ranks, average ranks and Win/Tie/Loss from long-format
    /// values (columns technique,dataset,run,value).
    Stats {
        values: PathBuf,
        /// Technique the Win/Tie/Loss table is reported for.
        #[arg(long, default_value = "RNN")]
        reference: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Scott-Knott over every run rather than per-dataset means.
        #[arg(long)]
        pool_runs: bool,
    },
    /// Write a synthetic trend project and a config that runs it.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 600)]
        files: usize,
        #[arg(long, default_value_t = 4)]
        versions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, output } => run(&config, output),
        Command::Gradcheck {
            hidden,
            input,
            steps,
            seed,
            grid,
        } => gradcheck(hidden, input, steps, seed, grid),
        Command::Eval { scores, curve } => eval(&scores, curve.as_deref()),
        Command::Stats {
            values,
            reference,
            alpha,
            pool_runs,
        } => stats(&values, &reference, alpha, pool_runs),
        Command::Synth {
            dir,
            files,
            versions,
            seed,
            repeats,
        } => synth(&dir, files, versions, seed, repeats),
    }
}

fn run(config: &Path, output: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(out) = output {
        cfg.output_dir = out;
    }
    let report = run_experiment(&cfg)?;
    let dir = cfg.resolved_output_dir();
    emit_report(&report, &dir)?;
    for e in &report.errors {
        eprintln!("project {}: {}", e.project, e.message);
    }
    println!(
        "{} project(s) evaluated, {} failed; report written to {}",
        report.projects.len(),
        report.errors.len(),
        dir.display()
    );
    Ok(if report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn gradcheck(hidden: usize, input: usize, steps: usize, seed: u64, grid: bool) -> Result<ExitCode> {
    let cases: Vec<(usize, usize, usize)> = if grid {
        let mut v = Vec::new();
        for h in [1, 3, 8] {
            for i in [1, 4, 24] {
                for t in [1, 2, 5] {
                    v.push((h, i, t));
                }
            }
        }
        v
    } else {
        vec![(hidden, input, steps)]
    };
    let mut worst: f64 = 0.0;
    for (h, i, t) in cases {
        let hp = Hyperparams {
            hidden_size: h,
            seed,
            ..Default::default()
        };
        let err = gradient_check(&hp, i, t)?;
        println!("hidden {h:>2}  input {i:>2}  steps {t}  max relative error {err:.3e}");
        worst = worst.max(err);
    }
    let ok = worst < REL_ERR_FLOOR;
    println!(
        "{}: worst {worst:.3e} (tolerance {REL_ERR_FLOOR:e})",
        if ok { "ok" } else { "FAILED" }
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Deserialize)]
struct ScoreRow {
    name: String,
    score: f64,
    loc: u64,
    bugs: u32,
    #[serde(default)]
    label: Option<u8>,
}

fn eval(path: &Path, curve: Option<&Path>) -> Result<ExitCode> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut files = Vec::new();
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        if let Some(label) = row.label {
            if label != u8::from(row.bugs > 0) {
                bail!("row {}: label {label} disagrees with bugs {}", i + 1, row.bugs);
            }
        }
        files.push(ScoredFile::new(FileKey::new(&row.name)?, row.score, row.loc, row.bugs)?);
    }
    let report = evaluate(&files)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = curve {
        let file = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
        CeEvaluation::new(&files)?.model.write_csv(file)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct ValueRow {
    technique: String,
    dataset: String,
    run: String,
    value: f64,
}

fn stats(path: &Path, reference: &str, alpha: f64, pool_runs: bool) -> Result<ExitCode> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut techniques: Vec<String> = Vec::new();
    // dataset → technique → runs in file order
    let mut table: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, row) in rdr.deserialize::<ValueRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        if !row.value.is_finite() {
            bail!("row {}: non-finite value", i + 1);
        }
        if !seen.insert((row.technique.clone(), row.dataset.clone(), row.run.clone())) {
            bail!(
                "row {}: duplicate ({}, {}, {})",
                i + 1,
                row.technique,
                row.dataset,
                row.run
            );
        }
        if !techniques.contains(&row.technique) {
            techniques.push(row.technique.clone());
        }
        table
            .entry(row.dataset)
            .or_default()
            .entry(row.technique)
            .or_default()
            .push(row.value);
    }
    if table.is_empty() {
        bail!("no values in {}", path.display());
    }
    for (dataset, per) in &table {
        if let Some(t) = techniques.iter().find(|t| !per.contains_key(*t)) {
            bail!("technique `{t}` has no values for dataset `{dataset}`");
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let sk_input: BTreeMap<String, Vec<f64>> = techniques
        .iter()
        .map(|t| {
            let values = table
                .values()
                .flat_map(|per| if pool_runs { per[t].clone() } else { vec![mean(&per[t])] })
                .collect();
            (t.clone(), values)
        })
        .collect();
    let sk = scott_knott(&sk_input, alpha)?;
    let per_dataset: Vec<BTreeMap<String, f64>> = table
        .values()
        .map(|per| techniques.iter().map(|t| (t.clone(), mean(&per[t]))).collect())
        .collect();
    let ar = average_rank(&per_dataset);

    println!(
        "Scott-Knott (alpha {alpha}, {})",
        if pool_runs { "pooled runs" } else { "per-dataset means" }
    );
    for (i, group) in sk.ranks.iter().enumerate() {
        let members: Vec<String> = group.iter().map(|t| format!("{t} ({:.3})", sk.means[t])).collect();
        println!("  {}: {}", i + 1, members.join(", "));
    }
    println!("\ntechnique,mean,average_rank");
    for t in &techniques {
        let m = mean(&per_dataset.iter().map(|r| r[t]).collect::<Vec<_>>());
        println!("{t},{m:.3},{:.3}", ar[t]);
    }

    if techniques.iter().any(|t| t == reference) {
        println!("\nWin/Tie/Loss of {reference}\ntechnique,win,tie,loss");
        for t in techniques.iter().filter(|t| *t != reference) {
            let mut counts = WtlCounts::default();
            for (dataset, per) in &table {
                let (a, b) = (&per[reference], &per[t]);
                let (a, b) = match (a.len(), b.len()) {
                    (x, y) if x == y => (a.clone(), b.clone()),
                    (1, y) => (replicate(a[0], y), b.clone()),
                    (x, 1) => (a.clone(), replicate(b[0], x)),
                    (x, y) => bail!("dataset `{dataset}`: {reference} has {x} runs but {t} has {y}"),
                };
                counts.add(win_tie_loss(&a, &b)?);
            }
            println!("{t},{},{},{}", counts.wins, counts.ties, counts.losses);
        }
    } else {
        eprintln!("reference technique `{reference}` not found; Win/Tie/Loss skipped");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SynthConfig {
    repeats: usize,
    output_dir: PathBuf,
    project: Vec<ProjectConfig>,
}

fn synth(dir: &Path, files: usize, versions: usize, seed: u64, repeats: usize) -> Result<ExitCode> {
    let history = trend_history(&TrendSpec {
        files,
        versions,
        seed,
        ..Default::default()
    })?;
    let manifest = write_project(&history, dir)?;
    let cfg = SynthConfig {
        repeats,
        output_dir: PathBuf::from("results"),
        project: vec![ProjectConfig {
            manifest,
            train_version: None,
            test_version: None,
        }],
    };
    let path = dir.join("config.toml");
    std::fs::write(&path, toml::to_string(&cfg)?).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} versions of {files} files and {}", versions, path.display());
    Ok(ExitCode::SUCCESS)
}
