//! Effort-aware evaluation.
//!
//! Files are inspected in descending order of predicted defect density
//! (probability / LOC). The cost-effectiveness curve plots the cumulative
//! fraction of bugs found against the cumulative fraction of LOC inspected,
//! and `CE_π` normalises the area under it between the random diagonal and
//! the curve of the optimal (actual bug density) ordering:
//!
//! ```text
//! CE_π = (Area_π(model) − Area_π(random)) / (Area_π(optimal) − Area_π(random))
//! ```
//!
//! Areas are exact trapezoids over the curve vertices, cut at `π` by linear
//! interpolation; the random area is `π²/2`.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::FileKey;
use crate::error::{Error, Result};

/// Cut-offs reported in [`CeReport`].
pub const CE_CUTOFFS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

/// Share of total LOC inspected for [`acc_at_effort`].
pub const DEFAULT_EFFORT: f64 = 0.2;

const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// A file with its predicted probability and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredFile {
    pub key: FileKey,
    pub score: f64,
    /// At least 1; zero-LOC inputs are raised to 1 and flagged.
    pub loc: u64,
    pub bugs: u32,
    pub loc_adjusted: bool,
}

impl ScoredFile {
    pub fn new(key: FileKey, score: f64, loc: u64, bugs: u32) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::invalid(format!("score of `{key}` is not finite")));
        }
        Ok(ScoredFile {
            key,
            score,
            loc: loc.max(1),
            bugs,
            loc_adjusted: loc == 0,
        })
    }

    pub fn density(&self) -> f64 {
        self.score / self.loc as f64
    }

    pub fn bug_density(&self) -> f64 {
        self.bugs as f64 / self.loc as f64
    }

    pub fn is_defective(&self) -> bool {
        self.bugs > 0
    }
}

fn tie_break(a: &ScoredFile, b: &ScoredFile) -> Ordering {
    a.loc.cmp(&b.loc).then_with(|| a.key.cmp(&b.key))
}

fn sorted_by(files: &[ScoredFile], density: impl Fn(&ScoredFile) -> f64) -> Vec<ScoredFile> {
    let mut out = files.to_vec();
    out.sort_by(|a, b| {
        density(b)
            .partial_cmp(&density(a))
            .unwrap_or(Ordering::Equal)
            .then_with(|| tie_break(a, b))
    });
    out
}

/// Descending predicted density; ties go to the smaller file, then the key.
pub fn rank_by_density(files: &[ScoredFile]) -> Vec<ScoredFile> {
    sorted_by(files, ScoredFile::density)
}

/// Descending actual bug density with the same tie-breaks.
pub fn optimal_ordering(files: &[ScoredFile]) -> Vec<ScoredFile> {
    sorted_by(files, ScoredFile::bug_density)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeCurve {
    /// (cumulative LOC fraction, cumulative bug fraction), starting at (0, 0).
    pub points: Vec<(f64, f64)>,
    pub ordering: Vec<FileKey>,
}

impl CeCurve {
    /// Trapezoidal area over `[0, pi]`, interpolating the vertex pair that
    /// straddles `pi`.
    pub fn area(&self, pi: f64) -> f64 {
        let mut area = 0.0;
        for pair in self.points.windows(2) {
            let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
            if x0 >= pi {
                break;
            }
            if x1 <= pi {
                area += (x1 - x0) * (y0 + y1) / 2.0;
            } else {
                let y_cut = y0 + (y1 - y0) * (pi - x0) / (x1 - x0);
                area += (pi - x0) * (y0 + y_cut) / 2.0;
                break;
            }
        }
        area
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["loc_fraction", "bug_fraction"])?;
        for (x, y) in &self.points {
            wtr.write_record([x.to_string(), y.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Curve through the cumulative (LOC, bug) fractions of `ordering` as given.
/// With zero bugs overall the bug coordinate stays at 0.
pub fn ce_curve(ordering: &[ScoredFile]) -> Result<CeCurve> {
    let total_loc: u64 = ordering.iter().map(|f| f.loc).sum();
    if total_loc == 0 {
        return Err(Error::invalid("cost-effectiveness curve needs positive total LOC"));
    }
    let total_bugs: u64 = ordering.iter().map(|f| u64::from(f.bugs)).sum();
    let mut points = Vec::with_capacity(ordering.len() + 1);
    points.push((0.0, 0.0));
    let (mut cum_loc, mut cum_bugs) = (0u64, 0u64);
    for f in ordering {
        cum_loc += f.loc;
        cum_bugs += u64::from(f.bugs);
        let y = if total_bugs == 0 {
            0.0
        } else {
            cum_bugs as f64 / total_bugs as f64
        };
        points.push((cum_loc as f64 / total_loc as f64, y));
    }
    Ok(CeCurve {
        points,
        ordering: ordering.iter().map(|f| f.key.clone()).collect(),
    })
}

fn check_pi(pi: f64) -> Result<()> {
    if pi > 0.0 && pi <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("cut-off {pi} outside (0, 1]")))
    }
}

/// Model and optimal curves of one file set, reusable across cut-offs.
#[derive(Clone, Debug)]
pub struct CeEvaluation {
    pub model: CeCurve,
    pub optimal: CeCurve,
}

impl CeEvaluation {
    pub fn new(files: &[ScoredFile]) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::UndefinedCe("no files".into()));
        }
        if files.iter().all(|f| f.bugs == 0) {
            return Err(Error::UndefinedCe("no bugs among the files".into()));
        }
        Ok(CeEvaluation {
            model: ce_curve(&rank_by_density(files))?,
            optimal: ce_curve(&optimal_ordering(files))?,
        })
    }

    pub fn ce(&self, pi: f64) -> Result<f64> {
        check_pi(pi)?;
        let random = pi * pi / 2.0;
        let denom = self.optimal.area(pi) - random;
        if denom < DEGENERATE_DENOMINATOR {
            return Err(Error::UndefinedCe(format!(
                "optimal and random areas coincide at π = {pi}"
            )));
        }
        Ok((self.model.area(pi) - random) / denom)
    }
}

pub fn ce_pi(files: &[ScoredFile], pi: f64) -> Result<f64> {
    check_pi(pi)?;
    CeEvaluation::new(files)?.ce(pi)
}

/// Recall of defective files among those fully inspected within `effort`
/// of total LOC, walking the density ranking.
pub fn acc_at_effort(files: &[ScoredFile], effort: f64) -> Result<f64> {
    let defective = files.iter().filter(|f| f.is_defective()).count();
    if defective == 0 {
        return Err(Error::invalid("no defective files"));
    }
    let total: u64 = files.iter().map(|f| f.loc).sum();
    let mut cum = 0u64;
    let mut found = 0usize;
    for f in rank_by_density(files) {
        cum += f.loc;
        if cum as f64 / total as f64 > effort {
            break;
        }
        if f.is_defective() {
            found += 1;
        }
    }
    Ok(found as f64 / defective as f64)
}

/// Midranks (1-based) of `values`, ties sharing their average rank.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// ROC AUC by the rank-sum formulation; tied scores count one half.
pub fn auc(scores: &[(f64, u8)]) -> Result<f64> {
    if scores.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let n_pos = scores.iter().filter(|(_, y)| *y > 0).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    let values: Vec<f64> = scores.iter().map(|(s, _)| *s).collect();
    let ranks = average_ranks(&values);
    let rank_sum: f64 = ranks
        .iter()
        .zip(scores)
        .filter(|(_, (_, y))| *y > 0)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Everything reported for one scored test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeReport {
    #[serde(rename = "ce_0.1")]
    pub ce_01: f64,
    #[serde(rename = "ce_0.2")]
    pub ce_02: f64,
    #[serde(rename = "ce_0.5")]
    pub ce_05: f64,
    #[serde(rename = "ce_1.0")]
    pub ce_10: f64,
    pub acc: f64,
    pub auc: f64,
    /// Files whose zero LOC was raised to 1.
    pub loc_adjusted: usize,
}

/// Metric names in report order.
pub const REPORT_METRICS: [&str; 6] = ["ce_0.1", "ce_0.2", "ce_0.5", "ce_1.0", "acc", "auc"];

impl CeReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "ce_0.1" => self.ce_01,
            "ce_0.2" => self.ce_02,
            "ce_0.5" => self.ce_05,
            "ce_1.0" => self.ce_10,
            "acc" => self.acc,
            "auc" => self.auc,
            _ => return None,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [self.ce_01, self.ce_02, self.ce_05, self.ce_10, self.acc, self.auc]
    }
}

/// CE at every cut-off, ACC at 20% effort and AUC of the raw scores.
pub fn evaluate(files: &[ScoredFile]) -> Result<CeReport> {
    let eval = CeEvaluation::new(files)?;
    let scores: Vec<(f64, u8)> = files.iter().map(|f| (f.score, u8::from(f.is_defective()))).collect();
    Ok(CeReport {
        ce_01: eval.ce(CE_CUTOFFS[0])?,
        ce_02: eval.ce(CE_CUTOFFS[1])?,
        ce_05: eval.ce(CE_CUTOFFS[2])?,
        ce_10: eval.ce(CE_CUTOFFS[3])?,
        acc: acc_at_effort(files, DEFAULT_EFFORT)?,
        auc: auc(&scores)?,
        loc_adjusted: files.iter().filter(|f| f.loc_adjusted).count(),
    })
}
