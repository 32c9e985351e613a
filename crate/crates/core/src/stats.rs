//! Nonparametric comparison of techniques: Wilcoxon signed-rank test,
//! Cliff's delta, Win/Tie/Loss verdicts and the Scott-Knott ranking.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::effort_eval::average_ranks;
use crate::error::{Error, Result};

/// Largest sample (after dropping zero differences) tested exactly.
pub const EXACT_MAX_N: usize = 20;

/// Significance level for Win/Tie/Loss.
pub const WTL_ALPHA: f64 = 0.05;

/// Smallest |δ| that is not negligible.
pub const NEGLIGIBLE_DELTA: f64 = 0.147;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Two-sided p-value.
    pub p_value: f64,
    /// Sum of ranks of positive differences (W+).
    pub statistic: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub exact: bool,
    /// Every difference was zero; `p_value` is 1.
    pub degenerate: bool,
}

/// Two-sided Wilcoxon signed-rank test on `a − b`.
///
/// Zero differences are dropped and tied magnitudes share their average
/// rank. Up to [`EXACT_MAX_N`] pairs the null distribution of W+ is
/// enumerated exactly (over doubled ranks, which are integers); beyond that a
/// normal approximation with tie and continuity corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("paired samples must be non-empty and of equal length"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample value"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            statistic: 0.0,
            n: 0,
            exact: true,
            degenerate: true,
        });
    }

    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let statistic: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let w2 = (2.0 * statistic).round() as usize;
        let total: usize = doubled.iter().sum();
        // counts[s] = number of sign assignments whose doubled W+ equals s
        let mut counts = vec![0u64; total + 1];
        counts[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = (1u64 << n) as f64;
        let lower: u64 = counts[..=w2].iter().sum();
        let upper: u64 = counts[w2..].iter().sum();
        let p = (2.0 * lower.min(upper) as f64 / all).min(1.0);
        return Ok(WilcoxonResult {
            p_value: p,
            statistic,
            n,
            exact: true,
            degenerate: false,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite ranks"));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * normal.sf(z)).min(1.0);
    Ok(WilcoxonResult {
        p_value: p,
        statistic,
        n,
        exact: false,
        degenerate: false,
    })
}

/// `(#(aᵢ > bⱼ) − #(aᵢ < bⱼ)) / (|a|·|b|)`.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Cliff's delta needs two non-empty samples"));
    }
    let mut more = 0i64;
    let mut less = 0i64;
    for x in a {
        for y in b {
            if x > y {
                more += 1;
            } else if x < y {
                less += 1;
            }
        }
    }
    Ok((more - less) as f64 / (a.len() * b.len()) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WtlOutcome {
    Win,
    Tie,
    Loss,
}

impl WtlOutcome {
    pub fn flipped(self) -> Self {
        match self {
            WtlOutcome::Win => WtlOutcome::Loss,
            WtlOutcome::Tie => WtlOutcome::Tie,
            WtlOutcome::Loss => WtlOutcome::Win,
        }
    }
}

/// Verdict from a p-value and δ(reference, other).
pub fn classify_wtl(p_value: f64, delta: f64) -> WtlOutcome {
    if p_value < WTL_ALPHA && delta >= NEGLIGIBLE_DELTA {
        WtlOutcome::Win
    } else if p_value < WTL_ALPHA && -delta >= NEGLIGIBLE_DELTA {
        WtlOutcome::Loss
    } else {
        WtlOutcome::Tie
    }
}

/// Verdict for `reference` against `other` over paired repeat scores.
pub fn win_tie_loss(reference: &[f64], other: &[f64]) -> Result<WtlOutcome> {
    let test = wilcoxon_signed_rank(reference, other)?;
    let delta = cliffs_delta(reference, other)?;
    Ok(classify_wtl(test.p_value, delta))
}

/// Repeats a deterministic technique's single score `n` times.
pub fn replicate(value: f64, n: usize) -> Vec<f64> {
    vec![value; n]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WtlCounts {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

impl WtlCounts {
    pub fn add(&mut self, outcome: WtlOutcome) {
        match outcome {
            WtlOutcome::Win => self.wins += 1,
            WtlOutcome::Tie => self.ties += 1,
            WtlOutcome::Loss => self.losses += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.wins + self.ties + self.losses
    }
}

/// Techniques partitioned into statistically distinct ranks, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkGrouping {
    pub ranks: Vec<Vec<String>>,
    pub means: BTreeMap<String, f64>,
}

impl SkGrouping {
    /// 1-based rank of `technique`.
    pub fn rank_of(&self, technique: &str) -> Option<usize> {
        self.ranks
            .iter()
            .position(|r| r.iter().any(|t| t == technique))
            .map(|i| i + 1)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scott-Knott clustering of techniques by mean value.
///
/// Techniques are sorted by mean (descending); the split of the ordered list
/// maximising the between-group sum of squares `B₀` is kept when
/// `λ = π / (2(π − 2)) · B₀ / σ̂₀²` exceeds the χ² quantile with `k/(π − 2)`
/// degrees of freedom, and each side is split again. `σ̂₀²` is the classic
/// maximum-likelihood estimate combining the spread of the group means with
/// the pooled within-technique variance of a mean.
pub fn scott_knott(values: &BTreeMap<String, Vec<f64>>, alpha: f64) -> Result<SkGrouping> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let reps = values.values().next().map(Vec::len).unwrap_or(0);
    if values.values().any(|v| v.len() != reps || v.is_empty()) {
        return Err(Error::invalid(
            "every technique needs the same, non-zero number of values",
        ));
    }
    if values.values().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }

    let means: BTreeMap<String, f64> = values.iter().map(|(k, v)| (k.clone(), mean(v))).collect();
    let mut order: Vec<(&String, f64)> = means.iter().map(|(k, m)| (k, *m)).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite means").then_with(|| a.0.cmp(b.0)));

    // Pooled within-technique variance and its degrees of freedom.
    let k_total = values.len();
    let dof = k_total * reps.saturating_sub(1);
    let mean_var = if dof == 0 {
        0.0
    } else {
        let ss: f64 = values
            .iter()
            .map(|(k, v)| v.iter().map(|x| (x - means[k]).powi(2)).sum::<f64>())
            .sum();
        ss / dof as f64 / reps as f64
    };

    let sorted_means: Vec<f64> = order.iter().map(|(_, m)| *m).collect();
    let mut bounds = Vec::new();
    split(
        &sorted_means,
        0,
        sorted_means.len(),
        mean_var,
        dof as f64,
        alpha,
        &mut bounds,
    )?;

    let mut ranks = Vec::new();
    let mut start = 0;
    for end in bounds.into_iter().chain(std::iter::once(sorted_means.len())) {
        if end > start {
            ranks.push(order[start..end].iter().map(|(k, _)| (*k).clone()).collect());
        }
        start = end;
    }
    Ok(SkGrouping { ranks, means })
}

const SK_COEF: f64 = PI / (2.0 * (PI - 2.0));

fn split(
    means: &[f64],
    lo: usize,
    hi: usize,
    mean_var: f64,
    dof: f64,
    alpha: f64,
    bounds: &mut Vec<usize>,
) -> Result<()> {
    let group = &means[lo..hi];
    let k = group.len();
    if k < 2 {
        return Ok(());
    }
    let grand = mean(group);
    let mut best = (0.0, 0);
    for cut in 1..k {
        let (left, right) = group.split_at(cut);
        let b = left.len() as f64 * (mean(left) - grand).powi(2) + right.len() as f64 * (mean(right) - grand).powi(2);
        if b > best.0 {
            best = (b, cut);
        }
    }
    let (b0, cut) = best;
    if b0 <= 0.0 {
        return Ok(());
    }
    let spread: f64 = group.iter().map(|m| (m - grand).powi(2)).sum();
    let sigma2 = (spread + dof * mean_var) / (k as f64 + dof);
    if sigma2 <= 0.0 {
        return Ok(());
    }
    let lambda = SK_COEF * b0 / sigma2;
    let nu = k as f64 / (PI - 2.0);
    let critical = ChiSquared::new(nu)
        .map_err(|e| Error::invalid(format!("χ² distribution: {e}")))?
        .inverse_cdf(1.0 - alpha);
    if lambda > critical {
        split(means, lo, lo + cut, mean_var, dof, alpha, bounds)?;
        bounds.push(lo + cut);
        split(means, lo + cut, hi, mean_var, dof, alpha, bounds)?;
    }
    Ok(())
}
