use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use hvsm::experiment::ExperimentReport;

fn hvsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hvsm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Synthetic project with a quick config; returns the config path.
fn small_project(dir: &Path, seed: &str) -> std::path::PathBuf {
    let d = dir.to_str().unwrap();
    let o = hvsm(&[
        "synth",
        d,
        "--files",
        "80",
        "--versions",
        "4",
        "--seed",
        seed,
        "--repeats",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = dir.join("config.toml");
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[rnn]\niterations = 40\n\n[baselines.nn]\niterations = 40\n");
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn run_twice_gives_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_project(tmp.path(), "3");
    let cfg = cfg.to_str().unwrap();
    let mut reports = Vec::new();
    for out in ["a", "b"] {
        let out = tmp.path().join(out);
        let o = hvsm(&["run", cfg, "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn report_files_agree_with_each_other() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_project(tmp.path(), "5");
    let o = hvsm(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("results");
    let report = ExperimentReport::read_json(&out.join("report.json")).unwrap();
    assert_eq!(report.projects.len(), 1);
    assert_eq!(report.techniques, ["RNN", "LR", "NB", "KNN", "NN"]);

    // summary.csv means match the per-repeat values in report.json
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut in_summary = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[0] != "trend" {
            continue;
        }
        let runs = &report.projects[0].runs[cells[1]];
        in_summary.push(cells[1].to_string());
        for (i, metric) in header.iter().enumerate().skip(2) {
            let mean = runs.iter().map(|r| r.metric(metric).unwrap()).sum::<f64>() / runs.len() as f64;
            assert_eq!(cells[i], format!("{mean:.3}"), "{} {metric}", cells[1]);
        }
    }

    // each technique sits in exactly one Scott-Knott rank
    for grouping in report.aggregates.scott_knott.values() {
        for t in &in_summary {
            assert_eq!(grouping.ranks.iter().filter(|r| r.contains(t)).count(), 1);
        }
    }
    // every Win/Tie/Loss row covers all projects
    for rows in report.aggregates.win_tie_loss.values() {
        for counts in rows.values() {
            assert_eq!(counts.total(), report.projects.len());
        }
    }
    for name in [
        "sk_groups.txt",
        "win_tie_loss.csv",
        "datasets.csv",
        "ce_curves/trend_RNN.csv",
        "ce_curves/trend_KNN.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn sequence_model_beats_single_version_baseline_on_trend_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let o = hvsm(&[
        "synth",
        d,
        "--files",
        "400",
        "--versions",
        "4",
        "--seed",
        "8",
        "--repeats",
        "2",
    ]);
    assert!(o.status.success());
    let cfg = tmp.path().join("config.toml");
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[baselines]\ntechniques = [\"LR\"]\n");
    std::fs::write(&cfg, text).unwrap();
    let o = hvsm(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = ExperimentReport::read_json(&tmp.path().join("results/report.json")).unwrap();
    let ce1 = &report.aggregates.means["ce_1.0"];
    assert!(ce1["RNN"] > ce1["LR"], "{ce1:?}");
}

#[test]
fn eval_reports_worked_example() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.csv");
    std::fs::write(
        &scores,
        "name,score,loc,bugs,label\nf1,0.9,10,1,1\nf2,0.5,10,0,0\nf3,0.8,80,1,1\n",
    )
    .unwrap();
    let curve = tmp.path().join("curve.csv");
    let o = hvsm(&["eval", scores.to_str().unwrap(), "--curve", curve.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: BTreeMap<String, f64> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((report["ce_1.0"] - 0.7778).abs() < 1e-4);
    assert_eq!(report["auc"], 1.0);
    let curve = std::fs::read_to_string(curve).unwrap();
    assert_eq!(curve.lines().count(), 5);
}

#[test]
fn eval_rejects_inconsistent_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.csv");
    std::fs::write(&scores, "name,score,loc,bugs,label\nf1,0.9,10,0,1\nf2,0.5,10,1,1\n").unwrap();
    let o = hvsm(&["eval", scores.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("label"));
}

#[test]
fn stats_ranks_and_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let values = tmp.path().join("values.csv");
    let mut csv = String::from("technique,dataset,run,value\n");
    for d in 0..4 {
        for r in 0..10 {
            csv.push_str(&format!("RNN,d{d},{r},{}\n", 0.8 + 0.001 * r as f64));
            csv.push_str(&format!("NN,d{d},{r},{}\n", 0.3 + 0.001 * r as f64));
        }
        csv.push_str(&format!("LR,d{d},0,0.5\n"));
    }
    std::fs::write(&values, csv).unwrap();
    let o = hvsm(&["stats", values.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("  1: RNN (0.80"), "{out}");
    assert!(out.contains("  3: NN (0.30"), "{out}");
    assert!(out.contains("LR,0.500,2.000"), "{out}");
    assert!(out.contains("NN,4,0,0"), "{out}");
    assert!(out.contains("LR,4,0,0"), "{out}");
}

#[test]
fn gradcheck_grid_passes() {
    let o = hvsm(&["gradcheck", "--grid"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 28);
}

#[test]
fn errors_exit_nonzero() {
    let o = hvsm(&["run", "/nonexistent/config.toml"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "repeats = 0\n").unwrap();
    assert!(!hvsm(&["run", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn missing_tables_are_recorded_per_project() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_project(tmp.path(), "2");
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str(
        "\n[[project]]\nname = \"ghost\"\n[[project.version]]\nid = \"1\"\nmetrics = \"nope-1.csv\"\n\
         [[project.version]]\nid = \"2\"\nmetrics = \"nope-2.csv\"\n",
    );
    std::fs::write(&cfg, text).unwrap();
    let o = hvsm(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report = ExperimentReport::read_json(&tmp.path().join("results/report.json")).unwrap();
    assert_eq!(report.projects.len(), 1);
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].project, "ghost");
}
