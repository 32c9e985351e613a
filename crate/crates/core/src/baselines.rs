//! Single-version classifiers trained on the anchor version's metric vectors.
//!
//! Every model z-scores its inputs with a [`Normalizer`] fitted on its own
//! training rows.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::MetricVector;
use crate::error::{Error, Result};
use crate::history::{HvsmSet, Normalizer};
use crate::rnn::{self, sigmoid, Hyperparams, RnnParams, Sequence};

pub const NB_VARIANCE_FLOOR: f64 = 1e-9;
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    LogisticRegression,
    GaussianNb,
    Knn { k: usize },
    FeedforwardNn,
}

impl BaselineKind {
    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            BaselineKind::LogisticRegression => "LR",
            BaselineKind::GaussianNb => "NB",
            BaselineKind::Knn { .. } => "KNN",
            BaselineKind::FeedforwardNn => "NN",
        }
    }

    /// Whether the learner depends on a random seed.
    pub fn is_random(&self) -> bool {
        matches!(self, BaselineKind::FeedforwardNn)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Learned {
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    GaussianNb {
        /// Indexed by class (0 = clean, 1 = defective).
        means: [Vec<f64>; 2],
        vars: [Vec<f64>; 2],
        log_priors: [f64; 2],
    },
    Knn {
        k: usize,
        points: Vec<Vec<f64>>,
        labels: Vec<u8>,
    },
    Feedforward(RnnParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub normalizer: Normalizer,
    pub learned: Learned,
}

/// `(anchor-version vector, label)` of every item in an HVSM set.
pub fn anchor_features(set: &HvsmSet) -> Result<Vec<(MetricVector, u8)>> {
    set.items
        .iter()
        .map(|h| {
            let label = h
                .label
                .ok_or_else(|| Error::invalid(format!("file `{}` has no label", h.key)))?;
            Ok((h.last().clone(), label))
        })
        .collect()
}

pub fn train_baseline(kind: BaselineKind, features: &[(MetricVector, u8)], h: &Hyperparams) -> Result<BaselineModel> {
    let rows: Vec<&[f64]> = features.iter().map(|(mv, _)| mv.values()).collect();
    let labels: Vec<u8> = features.iter().map(|(_, y)| *y).collect();
    train_rows(kind, &rows, &labels, h)
}

/// Same as [`train_baseline`] on raw rows.
pub fn train_rows(kind: BaselineKind, rows: &[&[f64]], labels: &[u8], h: &Hyperparams) -> Result<BaselineModel> {
    if rows.is_empty() {
        return Err(Error::invalid("empty training data"));
    }
    if rows.len() != labels.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    if let Some(y) = labels.iter().find(|y| **y > 1) {
        return Err(Error::invalid(format!("label must be 0 or 1, got {y}")));
    }
    let normalizer = Normalizer::fit_rows(rows.iter().copied())?;
    let x: Vec<Vec<f64>> = rows.iter().map(|r| normalizer.transform(r)).collect::<Result<_>>()?;
    let positives = labels.iter().filter(|y| **y == 1).count();
    let single_class = positives == 0 || positives == labels.len();

    let learned = match kind {
        BaselineKind::LogisticRegression => {
            if single_class {
                return Err(Error::invalid("logistic regression needs both classes"));
            }
            fit_logistic(&x, labels, h)?
        }
        BaselineKind::GaussianNb => {
            if single_class {
                return Err(Error::invalid("naive Bayes needs both classes"));
            }
            fit_gaussian_nb(&x, labels)
        }
        BaselineKind::Knn { k } => {
            if k == 0 {
                return Err(Error::invalid("k must be at least 1"));
            }
            if k > x.len() {
                return Err(Error::invalid(format!(
                    "k = {k} exceeds the {} training points",
                    x.len()
                )));
            }
            Learned::Knn {
                k,
                points: x,
                labels: labels.to_vec(),
            }
        }
        BaselineKind::FeedforwardNn => {
            let batch: Vec<Sequence> = x
                .into_iter()
                .zip(labels)
                .map(|(row, &label)| Sequence {
                    steps: vec![row],
                    label,
                })
                .collect();
            Learned::Feedforward(rnn::train(&batch, h)?.params)
        }
    };
    Ok(BaselineModel {
        kind,
        normalizer,
        learned,
    })
}

fn fit_logistic(x: &[Vec<f64>], y: &[u8], h: &Hyperparams) -> Result<Learned> {
    h.validate()?;
    let dim = x[0].len();
    let m = x.len() as f64;
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    for iteration in 0..h.iterations {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let err = sigmoid(dot(&weights, row) + bias) - f64::from(label);
            for (g, xi) in gw.iter_mut().zip(row) {
                *g += err * xi;
            }
            gb += err;
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= h.eta * (g / m + h.lambda * *w);
        }
        bias -= h.eta * gb / m;
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration });
        }
    }
    Ok(Learned::Logistic { weights, bias })
}

fn fit_gaussian_nb(x: &[Vec<f64>], y: &[u8]) -> Learned {
    let dim = x[0].len();
    let mut means = [vec![0.0; dim], vec![0.0; dim]];
    let mut vars = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (row, &label) in x.iter().zip(y) {
        let c = usize::from(label);
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(row) {
            *m += v;
        }
    }
    for c in 0..2 {
        for m in &mut means[c] {
            *m /= counts[c] as f64;
        }
    }
    for (row, &label) in x.iter().zip(y) {
        let c = usize::from(label);
        for ((v, xi), m) in vars[c].iter_mut().zip(row).zip(&means[c]) {
            *v += (xi - m) * (xi - m);
        }
    }
    for c in 0..2 {
        for v in &mut vars[c] {
            *v = (*v / counts[c] as f64).max(NB_VARIANCE_FLOOR);
        }
    }
    let n = x.len() as f64;
    let log_priors = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
    Learned::GaussianNb {
        means,
        vars,
        log_priors,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_log_joint(x: &[f64], means: &[f64], vars: &[f64], log_prior: f64) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    log_prior
        + x.iter()
            .zip(means.iter().zip(vars))
            .map(|(xi, (m, v))| -0.5 * (ln_2pi + v.ln()) - (xi - m) * (xi - m) / (2.0 * v))
            .sum::<f64>()
}

impl BaselineModel {
    pub fn predict(&self, x: &MetricVector) -> Result<f64> {
        self.predict_values(x.values())
    }

    /// Probability of the defective class in `[0, 1]`.
    pub fn predict_values(&self, raw: &[f64]) -> Result<f64> {
        let x = self.normalizer.transform(raw)?;
        Ok(match &self.learned {
            Learned::Logistic { weights, bias } => sigmoid(dot(weights, &x) + bias),
            Learned::GaussianNb { .. } => self.nb_posteriors(&x)?.1,
            Learned::Knn { k, points, labels } => {
                let mut dist: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let d2: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                        (d2, i)
                    })
                    .collect();
                // stable: equal distances keep training order
                dist.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
                let votes = dist[..*k].iter().filter(|(_, i)| labels[*i] == 1).count();
                votes as f64 / *k as f64
            }
            Learned::Feedforward(params) => rnn::forward(params, &[x])?.probability,
        })
    }

    /// `(P(clean | x), P(defective | x))` for naive Bayes, from normalised `x`.
    fn nb_posteriors(&self, x: &[f64]) -> Result<(f64, f64)> {
        let Learned::GaussianNb {
            means,
            vars,
            log_priors,
        } = &self.learned
        else {
            return Err(Error::invalid("not a naive Bayes model"));
        };
        let l0 = gaussian_log_joint(x, &means[0], &vars[0], log_priors[0]);
        let l1 = gaussian_log_joint(x, &means[1], &vars[1], log_priors[1]);
        Ok((sigmoid(l0 - l1), sigmoid(l1 - l0)))
    }

    /// Both class posteriors of a naive Bayes model for a raw input.
    pub fn class_posteriors(&self, raw: &[f64]) -> Result<(f64, f64)> {
        let x = self.normalizer.transform(raw)?;
        self.nb_posteriors(&x)
    }
}

pub fn predict_baseline(m: &BaselineModel, x: &MetricVector) -> Result<f64> {
    m.predict(x)
}
