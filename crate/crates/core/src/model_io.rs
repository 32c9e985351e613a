//! Plain-text model files.
//!
//! ```text
//! hvsm-model 1
//! kind rnn
//! input_dim 20
//! hidden_size 16
//! ...
//! array theta 353
//! 0.0123 -0.0456 ...
//! end
//! ```
//!
//! Scalars are `key value` lines; arrays are an `array <name> <len>` line
//! followed by one line of whitespace-separated values. Floats are written
//! with their shortest round-trip representation, so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::baselines::{BaselineKind, BaselineModel, Learned};
use crate::error::{Error, Result};
use crate::history::Normalizer;
use crate::rnn::{Hyperparams, RnnModel, RnnParams};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "hvsm-model";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelEnvelope {
    pub kind: String,
    pub fields: Vec<(String, String)>,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl ModelEnvelope {
    pub fn new(kind: &str) -> Self {
        ModelEnvelope {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn array(mut self, name: &str, values: &[f64]) -> Self {
        self.arrays.push((name.to_string(), values.to_vec()));
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::ModelFormat(format!("missing field `{key}`")))
    }

    pub fn parse_field<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::ModelFormat(format!("field `{key}` has invalid value `{raw}`")))
    }

    pub fn get_array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::ModelFormat(format!("missing array `{name}`")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
        writeln!(out, "kind {}", self.kind).unwrap();
        for (k, v) in &self.fields {
            writeln!(out, "{k} {v}").unwrap();
        }
        for (name, values) in &self.arrays {
            writeln!(out, "array {name} {}", values.len()).unwrap();
            let line: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::ModelFormat(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty model file".into()))?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v.trim().parse::<u32>().ok() == Some(FORMAT_VERSION) => {}
            _ => return Err(bad(format!("unsupported header `{header}`"))),
        }
        let kind_line = lines.next().ok_or_else(|| bad("missing kind".into()))?;
        let kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| bad(format!("expected `kind`, got `{kind_line}`")))?
            .trim()
            .to_string();

        let mut env = ModelEnvelope::new(&kind);
        let mut ended = false;
        while let Some(line) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            let (key, rest) = line
                .split_once(' ')
                .ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            if key == "array" {
                let (name, len) = rest
                    .split_once(' ')
                    .ok_or_else(|| bad(format!("malformed array header `{line}`")))?;
                let len: usize = len
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad array length in `{line}`")))?;
                let data = lines.next().ok_or_else(|| bad(format!("array `{name}` has no data")))?;
                let values = data
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| bad(format!("array `{name}`: invalid value `{t}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if values.len() != len {
                    return Err(bad(format!(
                        "array `{name}` declares {len} values, found {}",
                        values.len()
                    )));
                }
                env.arrays.push((name.to_string(), values));
            } else {
                env.fields.push((key.to_string(), rest.to_string()));
            }
        }
        if !ended {
            return Err(bad("missing `end` marker".into()));
        }
        Ok(env)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn hyperparam_fields(env: ModelEnvelope, h: &Hyperparams) -> ModelEnvelope {
    env.field("seed", h.seed)
        .field("eta", format!("{:?}", h.eta))
        .field("lambda", format!("{:?}", h.lambda))
        .field("iterations", h.iterations)
        .field("init_scale", format!("{:?}", h.init_scale))
        .field("halve_on_increase", h.halve_on_increase)
}

fn read_hyperparams(env: &ModelEnvelope, hidden_size: usize) -> Result<Hyperparams> {
    Ok(Hyperparams {
        hidden_size,
        eta: env.parse_field("eta")?,
        lambda: env.parse_field("lambda")?,
        iterations: env.parse_field("iterations")?,
        seed: env.parse_field("seed")?,
        init_scale: env.parse_field("init_scale")?,
        halve_on_increase: env.parse_field("halve_on_increase")?,
    })
}

fn read_normalizer(env: &ModelEnvelope, dim: usize) -> Result<Normalizer> {
    let mean = env.get_array("normalizer.mean")?.to_vec();
    let std = env.get_array("normalizer.std")?.to_vec();
    if mean.len() != dim || std.len() != dim {
        return Err(Error::ModelFormat("normalizer does not match input_dim".into()));
    }
    if std.iter().any(|s| *s <= 0.0) {
        return Err(Error::ModelFormat("normalizer std must be positive".into()));
    }
    Ok(Normalizer { mean, std })
}

impl RnnModel {
    pub fn to_envelope(&self) -> ModelEnvelope {
        let env = ModelEnvelope::new("rnn")
            .field("input_dim", self.params.input_dim())
            .field("hidden_size", self.params.hidden_size());
        hyperparam_fields(env, &self.hyperparams)
            .array("normalizer.mean", &self.normalizer.mean)
            .array("normalizer.std", &self.normalizer.std)
            .array("theta", self.params.as_flat())
    }

    pub fn from_envelope(env: &ModelEnvelope) -> Result<Self> {
        if env.kind != "rnn" {
            return Err(Error::ModelFormat(format!("expected an rnn model, got `{}`", env.kind)));
        }
        let input_dim: usize = env.parse_field("input_dim")?;
        let hidden: usize = env.parse_field("hidden_size")?;
        Ok(RnnModel {
            params: RnnParams::from_flat(input_dim, hidden, env.get_array("theta")?.to_vec())?,
            normalizer: read_normalizer(env, input_dim)?,
            hyperparams: read_hyperparams(env, hidden)?,
            loss_history: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_envelope().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_envelope(&ModelEnvelope::load(path)?)
    }
}

impl BaselineModel {
    pub fn to_envelope(&self) -> ModelEnvelope {
        let dim = self.normalizer.dim();
        let env = ModelEnvelope::new(&self.kind.label().to_ascii_lowercase()).field("input_dim", dim);
        let env = match &self.learned {
            Learned::Logistic { weights, bias } => env.array("weights", weights).array("bias", &[*bias]),
            Learned::GaussianNb {
                means,
                vars,
                log_priors,
            } => env
                .array("mean.0", &means[0])
                .array("mean.1", &means[1])
                .array("var.0", &vars[0])
                .array("var.1", &vars[1])
                .array("log_prior", log_priors),
            Learned::Knn { k, points, labels } => {
                let flat: Vec<f64> = points.iter().flatten().copied().collect();
                let labels: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
                env.field("k", k)
                    .field("points", points.len())
                    .array("train.x", &flat)
                    .array("train.y", &labels)
            }
            Learned::Feedforward(params) => env
                .field("hidden_size", params.hidden_size())
                .array("theta", params.as_flat()),
        };
        env.array("normalizer.mean", &self.normalizer.mean)
            .array("normalizer.std", &self.normalizer.std)
    }

    pub fn from_envelope(env: &ModelEnvelope) -> Result<Self> {
        let dim: usize = env.parse_field("input_dim")?;
        let normalizer = read_normalizer(env, dim)?;
        let sized = |name: &str, len: usize| -> Result<Vec<f64>> {
            let a = env.get_array(name)?;
            if a.len() != len {
                return Err(Error::ModelFormat(format!("array `{name}` should hold {len} values")));
            }
            Ok(a.to_vec())
        };
        let (kind, learned) = match env.kind.as_str() {
            "lr" => (
                BaselineKind::LogisticRegression,
                Learned::Logistic {
                    weights: sized("weights", dim)?,
                    bias: sized("bias", 1)?[0],
                },
            ),
            "nb" => {
                let priors = sized("log_prior", 2)?;
                (
                    BaselineKind::GaussianNb,
                    Learned::GaussianNb {
                        means: [sized("mean.0", dim)?, sized("mean.1", dim)?],
                        vars: [sized("var.0", dim)?, sized("var.1", dim)?],
                        log_priors: [priors[0], priors[1]],
                    },
                )
            }
            "knn" => {
                let k: usize = env.parse_field("k")?;
                let n: usize = env.parse_field("points")?;
                let flat = sized("train.x", n * dim)?;
                let labels = sized("train.y", n)?
                    .into_iter()
                    .map(|y| match y {
                        0.0 => Ok(0u8),
                        1.0 => Ok(1u8),
                        _ => Err(Error::ModelFormat(format!("invalid kNN label {y}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if k == 0 || k > n {
                    return Err(Error::ModelFormat(format!("invalid k = {k} for {n} points")));
                }
                let points = if dim == 0 {
                    vec![Vec::new(); n]
                } else {
                    flat.chunks(dim).map(<[f64]>::to_vec).collect()
                };
                (BaselineKind::Knn { k }, Learned::Knn { k, points, labels })
            }
            "nn" => {
                let hidden: usize = env.parse_field("hidden_size")?;
                (
                    BaselineKind::FeedforwardNn,
                    Learned::Feedforward(RnnParams::from_flat(dim, hidden, env.get_array("theta")?.to_vec())?),
                )
            }
            other => return Err(Error::ModelFormat(format!("unknown model kind `{other}`"))),
        };
        Ok(BaselineModel {
            kind,
            normalizer,
            learned,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_envelope().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_envelope(&ModelEnvelope::load(path)?)
    }
}
