//! Single-hidden-layer recurrent classifier over variable-length sequences.
//!
//! ```text
//! S¹ = tanh(U x¹ + b)
//! Sᵗ = tanh(U xᵗ + W Sᵗ⁻¹ + b)        t = 2..T
//! P  = sigmoid(V Sᵀ + c)
//! L  = −y log P − (1−y) log(1−P) + λ/2 (‖U‖² + ‖V‖² + ‖W‖²)
//! ```
//!
//! The same weights are applied at every step, so one model handles sequences
//! of any length. Training is full-batch gradient descent: the gradient is the
//! average of per-sample BPTT gradients plus the L2 term on `U`, `V`, `W`.
//!
//! Parameters live in one flat vector laid out as `[U | W | V | b | c]`, with
//! `U` (hidden × input) and `W` (hidden × hidden) stored row-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{apply_normalizer, fit_normalizer, Hvsm, HvsmSet, Normalizer};

/// Lower/upper clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Samples per parallel work unit. Partial sums are combined in chunk order,
/// so results do not depend on the thread count.
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub hidden_size: usize,
    /// Learning rate.
    pub eta: f64,
    /// L2 weight on U, V, W.
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Half-width of the uniform weight initialisation.
    pub init_scale: f64,
    /// Halve `eta` (up to 20 times per step) whenever a step would raise the loss.
    pub halve_on_increase: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hidden_size: 16,
            eta: 0.1,
            lambda: 1e-4,
            iterations: 500,
            seed: 0,
            init_scale: 0.2,
            halve_on_increase: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::invalid("hidden_size must be positive"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta must be a finite non-negative number"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be a finite non-negative number"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init_scale must be a finite non-negative number"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layout {
    input: usize,
    hidden: usize,
}

impl Layout {
    fn u(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }
    fn w(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden * self.hidden
    }
    fn v(&self) -> std::ops::Range<usize> {
        let s = self.w().end;
        s..s + self.hidden
    }
    fn b(&self) -> std::ops::Range<usize> {
        let s = self.v().end;
        s..s + self.hidden
    }
    fn c(&self) -> usize {
        self.b().end
    }
    fn total(&self) -> usize {
        self.c() + 1
    }
    /// Indices of the regularised weights (U, W, V are contiguous).
    fn weights(&self) -> std::ops::Range<usize> {
        0..self.v().end
    }
}

macro_rules! param_views {
    ($ty:ident, $u:ident, $w:ident, $v:ident, $b:ident, $c:ident) => {
        impl $ty {
            pub fn input_dim(&self) -> usize {
                self.layout.input
            }

            pub fn hidden_size(&self) -> usize {
                self.layout.hidden
            }

            /// hidden × input, row-major.
            pub fn $u(&self) -> &[f64] {
                &self.theta[self.layout.u()]
            }

            /// hidden × hidden, row-major.
            pub fn $w(&self) -> &[f64] {
                &self.theta[self.layout.w()]
            }

            pub fn $v(&self) -> &[f64] {
                &self.theta[self.layout.v()]
            }

            pub fn $b(&self) -> &[f64] {
                &self.theta[self.layout.b()]
            }

            pub fn $c(&self) -> f64 {
                self.theta[self.layout.c()]
            }

            /// All entries in `[U | W | V | b | c]` order.
            pub fn as_flat(&self) -> &[f64] {
                &self.theta
            }
        }
    };
}

/// Weights and biases of the recurrent classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams {
    layout: Layout,
    theta: Vec<f64>,
}

param_views!(RnnParams, u, w, v, b, c);

impl RnnParams {
    pub fn zeros(input_dim: usize, hidden_size: usize) -> Self {
        let layout = Layout {
            input: input_dim,
            hidden: hidden_size,
        };
        RnnParams {
            layout,
            theta: vec![0.0; layout.total()],
        }
    }

    /// Rebuilds parameters from the flat `[U | W | V | b | c]` layout.
    pub fn from_flat(input_dim: usize, hidden_size: usize, theta: Vec<f64>) -> Result<Self> {
        let layout = Layout {
            input: input_dim,
            hidden: hidden_size,
        };
        if theta.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                expected: layout.total(),
                actual: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(RnnParams { layout, theta })
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// ‖U‖² + ‖V‖² + ‖W‖²; biases excluded.
    pub fn weight_sq_norm(&self) -> f64 {
        self.theta[self.layout.weights()].iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    fn step(&mut self, grad: &Gradients, eta: f64) {
        for (p, g) in self.theta.iter_mut().zip(&grad.theta) {
            *p -= eta * g;
        }
    }
}

/// Derivatives with the same shape as [`RnnParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    layout: Layout,
    theta: Vec<f64>,
}

param_views!(Gradients, du, dw, dv, db, dc);

impl Gradients {
    fn zeros_like(p: &RnnParams) -> Self {
        Gradients {
            layout: p.layout,
            theta: vec![0.0; p.theta.len()],
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.theta.iter_mut().zip(&other.theta) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.theta.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// U, V, W uniform in `[-init_scale, init_scale]`, drawn in that order from a
/// ChaCha8 stream seeded with `h.seed`; b and c start at zero.
pub fn init_params(h: &Hyperparams, input_dim: usize) -> Result<RnnParams> {
    if input_dim == 0 {
        return Err(Error::invalid("input dimension must be at least 1"));
    }
    h.validate()?;
    let mut p = RnnParams::zeros(input_dim, h.hidden_size);
    if h.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
        let s = h.init_scale;
        let layout = p.layout;
        for i in layout.u().chain(layout.v()).chain(layout.w()) {
            p.theta[i] = rng.random_range(-s..=s);
        }
    }
    Ok(p)
}

/// Inputs, hidden states and output of one unfolded pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub inputs: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub probability: f64,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn forward<S: AsRef<[f64]>>(p: &RnnParams, seq: &[S]) -> Result<ForwardTrace> {
    if seq.is_empty() {
        return Err(Error::invalid("sequence must contain at least one step"));
    }
    let (hid, inp) = (p.hidden_size(), p.input_dim());
    let (u, w, b) = (p.u(), p.w(), p.b());
    let mut inputs = Vec::with_capacity(seq.len());
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(seq.len());

    for x in seq {
        let x = x.as_ref();
        if x.len() != inp {
            return Err(Error::DimensionMismatch {
                expected: inp,
                actual: x.len(),
            });
        }
        let prev = states.last();
        let s: Vec<f64> = (0..hid)
            .map(|i| {
                let mut a = b[i] + dot(&u[i * inp..(i + 1) * inp], x);
                if let Some(prev) = prev {
                    a += dot(&w[i * hid..(i + 1) * hid], prev);
                }
                a.tanh()
            })
            .collect();
        inputs.push(x.to_vec());
        states.push(s);
    }

    let last = states.last().expect("non-empty");
    let probability = sigmoid(dot(p.v(), last) + p.c());
    Ok(ForwardTrace {
        inputs,
        states,
        probability,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_label(y: u8) -> Result<f64> {
    match y {
        0 => Ok(0.0),
        1 => Ok(1.0),
        _ => Err(Error::invalid(format!("label must be 0 or 1, got {y}"))),
    }
}

/// Cross-entropy of one prediction, with `P` clamped to `[1e-12, 1 − 1e-12]`.
pub fn sample_loss(prob: f64, y: u8) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!("probability {prob} outside [0, 1]")));
    }
    let y = check_label(y)?;
    let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    Ok(-y * p.ln() - (1.0 - y) * (1.0 - p).ln())
}

/// Regularised loss of one prediction. Biases are not penalised.
pub fn loss(prob: f64, y: u8, p: &RnnParams, lambda: f64) -> Result<f64> {
    Ok(sample_loss(prob, y)? + 0.5 * lambda * p.weight_sq_norm())
}

/// Exact gradient of the unregularised per-sample loss by backpropagation
/// through time.
pub fn backward(p: &RnnParams, trace: &ForwardTrace, y: u8) -> Result<Gradients> {
    let y = check_label(y)?;
    let mut g = Gradients::zeros_like(p);
    backward_into(p, trace, y, &mut g);
    Ok(g)
}

fn backward_into(p: &RnnParams, trace: &ForwardTrace, y: f64, g: &mut Gradients) {
    let (hid, inp) = (p.hidden_size(), p.input_dim());
    let layout = p.layout;
    let w = p.w();
    let t_max = trace.states.len();

    // dL/dz at the output for a sigmoid + cross-entropy head.
    let delta = trace.probability - y;
    let last = &trace.states[t_max - 1];
    for (gv, s) in g.theta[layout.v()].iter_mut().zip(last) {
        *gv += delta * s;
    }
    g.theta[layout.c()] += delta;

    let mut d_state: Vec<f64> = p.v().iter().map(|v| delta * v).collect();
    let mut d_pre = vec![0.0; hid];
    for t in (0..t_max).rev() {
        let s = &trace.states[t];
        for i in 0..hid {
            d_pre[i] = d_state[i] * (1.0 - s[i] * s[i]);
        }
        let x = &trace.inputs[t];
        let gu = &mut g.theta[layout.u()];
        for i in 0..hid {
            for (gij, xj) in gu[i * inp..(i + 1) * inp].iter_mut().zip(x) {
                *gij += d_pre[i] * xj;
            }
        }
        for (gb, d) in g.theta[layout.b()].iter_mut().zip(&d_pre) {
            *gb += d;
        }
        if t > 0 {
            let prev = &trace.states[t - 1];
            let gw = &mut g.theta[layout.w()];
            for i in 0..hid {
                for j in 0..hid {
                    gw[i * hid + j] += d_pre[i] * prev[j];
                }
            }
            for j in 0..hid {
                d_state[j] = (0..hid).map(|i| w[i * hid + j] * d_pre[i]).sum();
            }
        }
    }
}

/// A labelled, already-normalised training sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub steps: Vec<Vec<f64>>,
    pub label: u8,
}

impl Sequence {
    pub fn from_hvsm(h: &Hvsm) -> Result<Self> {
        let label = h
            .label
            .ok_or_else(|| Error::invalid(format!("file `{}` has no label", h.key)))?;
        Ok(Sequence {
            steps: h.sequence.iter().map(|mv| mv.values().to_vec()).collect(),
            label,
        })
    }
}

pub fn sequences(set: &HvsmSet) -> Result<Vec<Sequence>> {
    set.items.iter().map(Sequence::from_hvsm).collect()
}

/// Averaged gradient and loss over a full batch:
/// `(1/m) Σ ∂Lₐ/∂ω + λω` for ω ∈ {U, V, W}; bias gradients are not regularised.
pub fn batch_gradient(p: &RnnParams, batch: &[Sequence], lambda: f64) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Gradients::zeros_like(p);
            let mut total = 0.0;
            for sample in chunk {
                let trace = forward(p, &sample.steps)?;
                total += sample_loss(trace.probability, sample.label)?;
                backward_into(p, &trace, check_label(sample.label)?, &mut g);
            }
            Ok((g, total))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grad = Gradients::zeros_like(p);
    let mut total = 0.0;
    for (g, l) in &partials {
        grad.add_assign(g);
        total += l;
    }
    let m = batch.len() as f64;
    for x in &mut grad.theta {
        *x /= m;
    }
    for i in p.layout.weights() {
        grad.theta[i] += lambda * p.theta[i];
    }
    let mean_loss = total / m + 0.5 * lambda * p.weight_sq_norm();
    Ok((grad, mean_loss))
}

/// Mean regularised loss without gradients.
pub fn batch_loss(p: &RnnParams, batch: &[Sequence], lambda: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().try_fold(0.0, |acc, s| {
                let trace = forward(p, &s.steps)?;
                Ok::<_, Error>(acc + sample_loss(trace.probability, s.label)?)
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(partials.iter().sum::<f64>() / batch.len() as f64 + 0.5 * lambda * p.weight_sq_norm())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedRnn {
    pub params: RnnParams,
    /// Batch loss before each update.
    pub loss_history: Vec<f64>,
}

pub fn train(batch: &[Sequence], h: &Hyperparams) -> Result<TrainedRnn> {
    let input_dim = batch
        .first()
        .and_then(|s| s.steps.first())
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty training set"))?;
    let init = init_params(h, input_dim)?;
    train_from(init, batch, h)
}

/// Gradient descent starting from `params`.
pub fn train_from(mut params: RnnParams, batch: &[Sequence], h: &Hyperparams) -> Result<TrainedRnn> {
    h.validate()?;
    let mut eta = h.eta;
    let mut loss_history = Vec::with_capacity(h.iterations);
    for iteration in 0..h.iterations {
        let (grad, loss) = batch_gradient(&params, batch, h.lambda)?;
        if !loss.is_finite() || !grad.theta.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration });
        }
        loss_history.push(loss);

        if h.halve_on_increase {
            let mut candidate = params.clone();
            candidate.step(&grad, eta);
            let mut halvings = 0;
            while halvings < 20 && batch_loss(&candidate, batch, h.lambda)? > loss {
                eta *= 0.5;
                halvings += 1;
                candidate = params.clone();
                candidate.step(&grad, eta);
            }
            params = candidate;
        } else {
            params.step(&grad, eta);
        }
        if !params.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
    }
    Ok(TrainedRnn { params, loss_history })
}

/// Probability that a file is defective, after normalising each step.
pub fn predict(p: &RnnParams, s: &Hvsm, n: &Normalizer) -> Result<f64> {
    let steps = s
        .sequence
        .iter()
        .map(|mv| n.transform(mv.values()))
        .collect::<Result<Vec<_>>>()?;
    Ok(forward(p, &steps)?.probability)
}

/// A trained classifier together with the scaling fitted on its training data.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnModel {
    pub params: RnnParams,
    pub normalizer: Normalizer,
    pub hyperparams: Hyperparams,
    pub loss_history: Vec<f64>,
}

impl RnnModel {
    /// Fits the normaliser on `train` and runs gradient descent on the
    /// normalised sequences.
    pub fn fit(train: &HvsmSet, h: &Hyperparams) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        let normalizer = fit_normalizer(train)?;
        let normalized = apply_normalizer(&normalizer, train)?;
        let trained = self::train(&sequences(&normalized)?, h)?;
        Ok(RnnModel {
            params: trained.params,
            normalizer,
            hyperparams: h.clone(),
            loss_history: trained.loss_history,
        })
    }

    pub fn predict(&self, s: &Hvsm) -> Result<f64> {
        predict(&self.params, s, &self.normalizer)
    }

    pub fn predict_set(&self, set: &HvsmSet) -> Result<Vec<f64>> {
        set.items.par_iter().map(|h| self.predict(h)).collect()
    }
}

/// Relative error used by the gradient checker:
/// `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub const REL_ERR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares [`backward`] with central differences of the unregularised
/// sample loss for every parameter; returns the maximum relative error.
pub fn check_gradients<S: AsRef<[f64]>>(p: &RnnParams, seq: &[S], y: u8, eps: f64) -> Result<f64> {
    let trace = forward(p, seq)?;
    let analytic = backward(p, &trace, y)?;
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    for i in 0..p.theta.len() {
        let orig = probe.theta[i];
        probe.theta[i] = orig + eps;
        let plus = sample_loss(forward(&probe, seq)?.probability, y)?;
        probe.theta[i] = orig - eps;
        let minus = sample_loss(forward(&probe, seq)?.probability, y)?;
        probe.theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.theta[i], numeric));
    }
    Ok(worst)
}

/// Random parameters (biases included) and a random `steps`-long sequence
/// seeded from `h.seed`; checks both labels and returns the worst relative error.
pub fn gradient_check(h: &Hyperparams, input_dim: usize, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    let mut p = init_params(h, input_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed ^ 0x9e37_79b9_7f4a_7c15);
    let layout = p.layout;
    for i in layout.b() {
        p.theta[i] = rng.random_range(-0.5..0.5);
    }
    p.theta[layout.c()] = rng.random_range(-0.5..0.5);
    let seq: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for y in [0, 1] {
        worst = worst.max(check_gradients(&p, &seq, y, 1e-5)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hp(hidden: usize, seed: u64) -> Hyperparams {
        Hyperparams {
            hidden_size: hidden,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let h = hp(4, 7);
        let a = init_params(&h, 3).unwrap();
        let b = init_params(&h, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.b().iter().all(|&x| x == 0.0));
        assert_eq!(a.c(), 0.0);
        assert!(a.u().iter().all(|x| x.abs() <= 0.2));
        assert!(a.u().iter().any(|&x| x != 0.0));
        let c = init_params(&hp(4, 8), 3).unwrap();
        assert_ne!(a, c);

        let zero = init_params(&Hyperparams { init_scale: 0.0, ..h }, 3).unwrap();
        assert!(zero.as_flat().iter().all(|&x| x == 0.0));
        assert!(init_params(&hp(4, 0), 0).is_err());
    }

    #[test]
    fn zero_params_give_half() {
        let p = RnnParams::zeros(3, 5);
        let t = forward(&p, &[vec![1.0, -2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!(t.states.iter().flatten().all(|&s| s == 0.0));
        assert_eq!(t.probability, 0.5);
    }

    #[test]
    fn scalar_network_propagates_zeros() {
        let p = RnnParams::from_flat(1, 1, vec![1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let t = forward(&p, &[[0.0], [0.0]]).unwrap();
        assert_eq!(t.states, vec![vec![0.0], vec![0.0]]);
        assert_eq!(t.probability, 0.5);
    }

    #[test]
    fn single_step_matches_feedforward() {
        let p = gradient_params(3, 2, 11);
        let x = [0.3, -0.7];
        let t = forward(&p, &[x]).unwrap();
        let hidden: Vec<f64> = (0..3)
            .map(|i| (p.u()[i * 2] * x[0] + p.u()[i * 2 + 1] * x[1] + p.b()[i]).tanh())
            .collect();
        let z: f64 = hidden.iter().zip(p.v()).map(|(s, v)| s * v).sum::<f64>() + p.c();
        assert_abs_diff_eq!(t.probability, sigmoid(z), epsilon = 1e-15);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let p = RnnParams::zeros(2, 2);
        assert!(matches!(
            forward(&p, &[vec![1.0]]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
        let empty: [Vec<f64>; 0] = [];
        assert!(forward(&p, &empty).is_err());
    }

    #[test]
    fn loss_examples() {
        let zero = RnnParams::zeros(2, 2);
        assert_abs_diff_eq!(
            loss(0.5, 1, &zero, 0.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            loss(0.5, 0, &zero, 0.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            loss(0.5, 0, &zero, 1.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert!(loss(1.5, 0, &zero, 0.0).is_err());
        assert!(loss(f64::NAN, 0, &zero, 0.0).is_err());
        assert!(loss(1.0, 0, &zero, 0.0).unwrap().is_finite());

        // biases are not penalised
        let p = RnnParams::from_flat(1, 1, vec![1.0, 2.0, 3.0, 10.0, 10.0]).unwrap();
        assert_abs_diff_eq!(
            loss(0.5, 1, &p, 2.0).unwrap(),
            std::f64::consts::LN_2 + 14.0,
            epsilon = 1e-12
        );
    }

    fn gradient_params(hidden: usize, input: usize, seed: u64) -> RnnParams {
        let mut p = init_params(
            &Hyperparams {
                hidden_size: hidden,
                seed,
                init_scale: 0.8,
                ..Default::default()
            },
            input,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let l = p.layout;
        for i in l.b() {
            p.theta[i] = rng.random_range(-0.5..0.5);
        }
        p.theta[l.c()] = 0.3;
        p
    }

    #[test]
    fn output_error_for_positive_label() {
        let p = gradient_params(3, 2, 1);
        let t = forward(&p, &[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let g = backward(&p, &t, 1).unwrap();
        assert_eq!(g.dc(), t.probability - 1.0);
        assert!(g.dc() < 0.0);
    }

    #[test]
    fn single_step_has_no_recurrent_gradient() {
        let p = gradient_params(4, 3, 2);
        let t = forward(&p, &[[0.5, -0.1, 0.9]]).unwrap();
        let g = backward(&p, &t, 0).unwrap();
        assert!(g.dw().iter().all(|&x| x == 0.0));
        assert!(g.du().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn gradient_check_examples() {
        let h = hp(3, 5);
        assert!(gradient_check(&h, 4, 1).unwrap() < 1e-5);
        assert!(gradient_check(&h, 4, 5).unwrap() < 1e-5);
    }

    fn toy_batch() -> Vec<Sequence> {
        vec![
            Sequence {
                steps: vec![vec![1.0, 0.0], vec![1.0, 0.5]],
                label: 1,
            },
            Sequence {
                steps: vec![vec![-1.0, 0.0]],
                label: 0,
            },
        ]
    }

    #[test]
    fn batch_of_one_equals_backward() {
        let p = gradient_params(3, 2, 9);
        let batch = toy_batch()[..1].to_vec();
        let (g, l) = batch_gradient(&p, &batch, 0.0).unwrap();
        let t = forward(&p, &batch[0].steps).unwrap();
        assert_eq!(g, backward(&p, &t, 1).unwrap());
        assert_abs_diff_eq!(l, sample_loss(t.probability, 1).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let p = gradient_params(3, 2, 9);
        let batch = toy_batch();
        let doubled: Vec<Sequence> = batch.iter().chain(batch.iter()).cloned().collect();
        let (g1, l1) = batch_gradient(&p, &batch, 0.01).unwrap();
        let (g2, l2) = batch_gradient(&p, &doubled, 0.01).unwrap();
        for (a, b) in g1.as_flat().iter().zip(g2.as_flat()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(l1, l2, epsilon = 1e-15);
    }

    #[test]
    fn regulariser_only_gradient() {
        // V = 0 and c chosen so P is exactly y: no data gradient through V, c
        // except the (P - y) term, which vanishes.
        let mut p = gradient_params(2, 2, 3);
        let l = p.layout;
        for i in l.v() {
            p.theta[i] = 0.0;
        }
        p.theta[l.c()] = 0.0;
        // P = 0.5 for both labels; mixing y=0 and y=1 cancels the output error.
        let batch = vec![
            Sequence {
                steps: vec![vec![0.3, 0.1]],
                label: 1,
            },
            Sequence {
                steps: vec![vec![0.3, 0.1]],
                label: 0,
            },
        ];
        let lambda = 0.7;
        let (g, _) = batch_gradient(&p, &batch, lambda).unwrap();
        for i in l.weights() {
            assert_eq!(g.as_flat()[i], lambda * p.as_flat()[i]);
        }
        assert_eq!(g.dc(), 0.0);
        assert!(g.db().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_batch_is_error() {
        assert!(batch_gradient(&RnnParams::zeros(1, 1), &[], 0.0).is_err());
        assert!(train(&[], &Hyperparams::default()).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let h = Hyperparams {
            hidden_size: 3,
            eta: 0.0,
            iterations: 5,
            seed: 4,
            ..Default::default()
        };
        let out = train(&toy_batch(), &h).unwrap();
        assert_eq!(out.params, init_params(&h, 2).unwrap());
        assert_eq!(out.loss_history.len(), 5);
    }

    #[test]
    fn loss_decreases_on_separable_pair() {
        let batch = vec![
            Sequence {
                steps: vec![vec![1.0]],
                label: 1,
            },
            Sequence {
                steps: vec![vec![-1.0]],
                label: 0,
            },
        ];
        let h = Hyperparams {
            hidden_size: 4,
            eta: 0.05,
            lambda: 0.0,
            iterations: 11,
            seed: 1,
            ..Default::default()
        };
        let out = train(&batch, &h).unwrap();
        for pair in out.loss_history.windows(2) {
            assert!(pair[1] < pair[0], "{:?}", out.loss_history);
        }
        // the recorded value is the recomputed batch loss at that iterate
        let init = init_params(&h, 1).unwrap();
        assert_eq!(out.loss_history[0], batch_loss(&init, &batch, 0.0).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let h = Hyperparams {
            hidden_size: 3,
            iterations: 20,
            seed: 12,
            ..Default::default()
        };
        let a = train(&toy_batch(), &h).unwrap();
        let b = train(&toy_batch(), &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exploding_training_reports_iteration() {
        let h = Hyperparams {
            hidden_size: 2,
            eta: 1e308,
            lambda: 1.0,
            iterations: 10,
            seed: 1,
            init_scale: 1.0,
            ..Default::default()
        };
        assert!(matches!(train(&toy_batch(), &h), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn step_halving_never_increases_loss() {
        let h = Hyperparams {
            hidden_size: 3,
            eta: 50.0,
            lambda: 0.0,
            iterations: 15,
            seed: 2,
            halve_on_increase: true,
            ..Default::default()
        };
        let out = train(&toy_batch(), &h).unwrap();
        for pair in out.loss_history.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }
}
