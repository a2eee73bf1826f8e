//! Value verifier: a small tanh MLP with a scalar or categorical head.
//!
//! The scalar head squashes a single logit through the logistic function.
//! The categorical head is a softmax over the locations of a [`Support`];
//! its value prediction is the expectation of that distribution.
//!
//! Losses, per sample with target `y = c / k`:
//!
//! | mode       | loss                                   |
//! |------------|----------------------------------------|
//! | scalar-mse | `(sigmoid(z) - y)^2`                   |
//! | exp-mse    | `(sum_j p_j z_j - y)^2`                |
//! | hl         | `-sum_j t_j ln p_j`, `t` the posterior |
//! | combined   | `alpha * exp-mse + (1 - alpha) * hl`   |
//!
//! Gradients are derived by hand and checked against central differences.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::annotate::Dataset;
use crate::distributions::{make_posterior, make_support, PosteriorSpec, Support, SupportKind};
use crate::env::{ReasoningTreeEnv, State};
use crate::rng::derive_rng;
use crate::{Error, Result};

/// Number of input features.
pub const FEATURE_DIM: usize = 7;
const RECENT_EDGES: usize = 4;

/// Running score, depth fraction, the last four edge scores (most recent
/// first, zero padded) and a constant 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn featurize(env: &ReasoningTreeEnv, state: &State) -> Result<FeatureVector> {
    if state.depth() == 0 {
        return Err(Error::invalid("cannot featurize the root state"));
    }
    let scores = env.path_scores(state)?;
    let mut f = [0.0; FEATURE_DIM];
    f[0] = scores.iter().sum();
    f[1] = state.depth() as f64 / env.depth() as f64;
    for (slot, score) in scores.iter().rev().take(RECENT_EDGES).enumerate() {
        f[2 + slot] = *score;
    }
    f[FEATURE_DIM - 1] = 1.0;
    Ok(FeatureVector(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Head {
    Scalar,
    Categorical { support: Support },
}

impl Head {
    pub fn width(&self) -> usize {
        match self {
            Head::Scalar => 1,
            Head::Categorical { support } => support.len(),
        }
    }
}

/// Dense layer, `y = W x + b` with `W` stored row-major (`outputs x inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpVerifier {
    pub layers: Vec<Layer>,
    pub head: Head,
}

/// Output of the head for one input.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput {
    Scalar(f64),
    Categorical(Vec<f64>),
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-softmax of `logits`, written into `out`.
fn log_softmax(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    out.clear();
    out.extend(logits.iter().map(|z| z - lse));
}

/// Activations of every layer for one input.
struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`
    /// (tanh for hidden layers, raw logits for the last).
    acts: Vec<Vec<f64>>,
}

impl MlpVerifier {
    /// Network with the given hidden widths and zero weights.
    pub fn zeros(hidden: &[usize], head: Head) -> Self {
        let mut sizes = vec![FEATURE_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(head.width());
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        MlpVerifier { layers, head }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(hidden: &[usize], head: Head, seed: u64) -> Self {
        let mut model = Self::zeros(hidden, head);
        let mut rng = derive_rng(&[seed, 0x1A17]);
        for layer in &mut model.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
        }
        model
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_width()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Checks shapes of a model read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("model has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::invalid(format!("layer {i} input width does not chain")));
            }
        }
        if self.layers[self.layers.len() - 1].outputs != self.head.width() {
            return Err(Error::invalid("output width does not match the head"));
        }
        if let Head::Categorical { support } = &self.head {
            support.validate()?;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::invalid(format!(
                "feature length {} does not match input width {}",
                x.len(),
                self.input_width()
            )));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Trace { acts }
    }

    pub fn forward(&self, features: &[f64]) -> Result<HeadOutput> {
        self.check_input(features)?;
        let trace = self.trace(features);
        let logits = trace.acts.last().expect("output layer");
        Ok(match self.head {
            Head::Scalar => HeadOutput::Scalar(sigmoid(logits[0])),
            Head::Categorical { .. } => {
                let mut logp = Vec::new();
                log_softmax(logits, &mut logp);
                HeadOutput::Categorical(logp.into_iter().map(f64::exp).collect())
            }
        })
    }

    /// Value estimate: the squashed scalar, or the expectation of the
    /// predicted distribution over the support.
    pub fn predict_value(&self, features: &[f64]) -> Result<f64> {
        Ok(match (self.forward(features)?, &self.head) {
            (HeadOutput::Scalar(v), _) => v,
            (HeadOutput::Categorical(p), Head::Categorical { support }) => {
                p.iter().zip(support.locations()).map(|(p, z)| p * z).sum()
            }
            _ => unreachable!("head output matches head kind"),
        })
    }

    pub fn score_state(&self, env: &ReasoningTreeEnv, state: &State) -> Result<f64> {
        self.predict_value(featurize(env, state)?.as_slice())
    }
}

/// Objective being minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LossMode {
    ScalarMse,
    ExpMse,
    Hl,
    Combined { alpha: f64 },
}

impl LossMode {
    pub fn name(&self) -> &'static str {
        match self {
            LossMode::ScalarMse => "scalar-mse",
            LossMode::ExpMse => "exp-mse",
            LossMode::Hl => "hl",
            LossMode::Combined { .. } => "combined",
        }
    }

    pub fn needs_posterior(&self) -> bool {
        matches!(self, LossMode::Hl | LossMode::Combined { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Supervision {
    /// Train on final states only.
    OutcomeOnly,
    /// Train on every annotated prefix, final states included.
    Process,
}

/// Loss mode plus the posterior family used by histogram losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub loss: LossMode,
    pub posterior: PosteriorSpec,
}

impl Objective {
    pub fn new(loss: LossMode, posterior: PosteriorSpec) -> Self {
        Objective { loss, posterior }
    }
}

/// One supervised example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub c: usize,
    pub k: usize,
    pub is_final: bool,
}

/// Per-example regression target and, for histogram losses, posterior.
#[derive(Debug, Clone)]
struct Target {
    y: f64,
    dist: Option<Vec<f64>>,
}

fn check_objective(model: &MlpVerifier, objective: &Objective) -> Result<()> {
    if let LossMode::Combined { alpha } = objective.loss {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("combined-loss alpha must lie in [0, 1], got {alpha}")));
        }
    }
    match (&model.head, objective.loss) {
        (Head::Scalar, LossMode::ScalarMse) => Ok(()),
        (Head::Scalar, mode) => Err(Error::invalid(format!("{} needs a categorical head", mode.name()))),
        (Head::Categorical { .. }, LossMode::ScalarMse) => Err(Error::invalid("scalar-mse needs a scalar head")),
        _ => objective.posterior.validate(),
    }
}

fn build_targets(model: &MlpVerifier, examples: &[Example], objective: &Objective) -> Result<Vec<Target>> {
    check_objective(model, objective)?;
    examples
        .iter()
        .map(|ex| {
            if ex.k == 0 || ex.c > ex.k {
                return Err(Error::invalid(format!("bad count c = {} of k = {}", ex.c, ex.k)));
            }
            let dist = if objective.loss.needs_posterior() {
                let Head::Categorical { support } = &model.head else { unreachable!() };
                let expected = make_support(ex.k + 1, SupportKind::Equidistant)?;
                if support.locations() != expected.locations() {
                    return Err(Error::invalid(format!(
                        "histogram loss needs the equidistant support of k + 1 = {} locations",
                        ex.k + 1
                    )));
                }
                Some(make_posterior(&objective.posterior, ex.c, ex.k)?.into_probs())
            } else {
                None
            };
            Ok(Target { y: ex.c as f64 / ex.k as f64, dist })
        })
        .collect()
}

/// Gradient buffers shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(model: &MlpVerifier) -> Self {
        Gradients { layers: model.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    /// All entries in layer order, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }
}

/// Loss of one example and its derivative with respect to the logits.
fn loss_and_logit_grad(model: &MlpVerifier, logits: &[f64], target: &Target, loss: LossMode, dz: &mut Vec<f64>) -> f64 {
    dz.clear();
    dz.resize(logits.len(), 0.0);
    match (&model.head, loss) {
        (Head::Scalar, _) => {
            let v = sigmoid(logits[0]);
            let diff = v - target.y;
            dz[0] = 2.0 * diff * v * (1.0 - v);
            diff * diff
        }
        (Head::Categorical { support }, mode) => {
            let mut logp = Vec::with_capacity(logits.len());
            log_softmax(logits, &mut logp);
            let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let (w_mse, w_hl) = match mode {
                LossMode::ExpMse => (1.0, 0.0),
                LossMode::Hl => (0.0, 1.0),
                LossMode::Combined { alpha } => (alpha, 1.0 - alpha),
                LossMode::ScalarMse => unreachable!("checked by check_objective"),
            };
            let mut total = 0.0;
            if w_mse > 0.0 {
                let z = support.locations();
                let v: f64 = p.iter().zip(z).map(|(p, z)| p * z).sum();
                let diff = v - target.y;
                total += w_mse * diff * diff;
                for i in 0..p.len() {
                    dz[i] += w_mse * 2.0 * diff * p[i] * (z[i] - v);
                }
            }
            if w_hl > 0.0 {
                let t = target.dist.as_ref().expect("posterior target");
                let ce: f64 = -t.iter().zip(&logp).filter(|(t, _)| **t > 0.0).map(|(t, l)| t * l).sum::<f64>();
                total += w_hl * ce;
                for i in 0..p.len() {
                    dz[i] += w_hl * (p[i] - t[i]);
                }
            }
            total
        }
    }
}

fn accumulate(model: &MlpVerifier, x: &[f64], target: &Target, loss: LossMode, grads: &mut Gradients) -> f64 {
    let trace = model.trace(x);
    let mut delta = Vec::new();
    let value = loss_and_logit_grad(model, trace.acts.last().expect("logits"), target, loss, &mut delta);
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let input = &trace.acts[l];
        let g = &mut grads.layers[l];
        for (o, &d) in delta.iter().enumerate() {
            g.bias[o] += d;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, xi) in row.iter_mut().zip(input) {
                *gw += d * xi;
            }
        }
        if l > 0 {
            // Back through W, then through tanh: d/dx tanh = 1 - tanh^2.
            let mut prev = vec![0.0; layer.inputs];
            for (row, &d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
    value
}

fn batch_loss_and_grad(model: &MlpVerifier, batch: &[(&[f64], &Target)], loss: LossMode) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(model);
    let mut total = 0.0;
    for (x, t) in batch {
        total += accumulate(model, x, t, loss, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    (total / n, grads)
}

/// Mean loss over `batch` and its exact gradient.
pub fn loss_and_grad(model: &MlpVerifier, batch: &[Example], objective: &Objective) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    for ex in batch {
        model.check_input(ex.features.as_slice())?;
    }
    let targets = build_targets(model, batch, objective)?;
    let pairs: Vec<(&[f64], &Target)> = batch.iter().map(|e| e.features.as_slice()).zip(&targets).collect();
    Ok(batch_loss_and_grad(model, &pairs, objective.loss))
}

fn params_mut(model: &mut MlpVerifier) -> impl Iterator<Item = &mut f64> {
    model.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
}

/// Largest relative disagreement between the analytic gradient and central
/// differences with step `1e-5`, using `max(|a|, |n|, 1e-8)` as denominator.
pub fn grad_check(model: &MlpVerifier, batch: &[Example], objective: &Objective) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let (_, grads) = loss_and_grad(model, batch, objective)?;
    let analytic = grads.flatten();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let original = *params_mut(&mut probe).nth(i).expect("parameter index");
        *params_mut(&mut probe).nth(i).expect("parameter index") = original + STEP;
        let plus = loss_and_grad(&probe, batch, objective)?.0;
        *params_mut(&mut probe).nth(i).expect("parameter index") = original - STEP;
        let minus = loss_and_grad(&probe, batch, objective)?.0;
        *params_mut(&mut probe).nth(i).expect("parameter index") = original;
        let numeric = (plus - minus) / (2.0 * STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossMode,
    pub posterior: PosteriorSpec,
    pub supervision: Supervision,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Support of a categorical head; `None` means equidistant with
    /// `k + 1` locations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Support>,
}

impl TrainConfig {
    pub fn new(loss: LossMode, posterior: PosteriorSpec) -> Self {
        TrainConfig {
            loss,
            posterior,
            supervision: Supervision::Process,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            hidden: vec![64, 64],
            support: None,
        }
    }

    pub fn objective(&self) -> Objective {
        Objective::new(self.loss, self.posterior)
    }

    fn head(&self, k: usize) -> Result<Head> {
        Ok(match self.loss {
            LossMode::ScalarMse => Head::Scalar,
            _ => Head::Categorical {
                support: match &self.support {
                    Some(s) => s.clone(),
                    None => make_support(k + 1, SupportKind::Equidistant)?,
                },
            },
        })
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], step: 0, lr }
    }

    fn update(&mut self, model: &mut MlpVerifier, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let grads = grads.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias));
        for (((w, g), m), v) in params_mut(model).zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Trained model and the mean training loss of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpVerifier,
    pub epoch_losses: Vec<f64>,
}

/// Turns dataset records into examples under the given supervision.
pub fn examples_from_dataset(env: &ReasoningTreeEnv, dataset: &Dataset, supervision: Supervision) -> Result<Vec<Example>> {
    dataset
        .samples
        .iter()
        .filter(|s| supervision == Supervision::Process || s.is_final)
        .map(|s| {
            Ok(Example { features: featurize(env, &s.state())?, c: s.c, k: s.k, is_final: s.is_final })
        })
        .collect()
}

/// Mini-batch Adam on the dataset. Deterministic in `(dataset, config)`.
pub fn train(env: &ReasoningTreeEnv, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::invalid("batch size and epoch count must be positive"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let examples = examples_from_dataset(env, dataset, config.supervision)?;
    if examples.is_empty() {
        return Err(Error::invalid("no training examples after supervision filtering"));
    }
    let mut model = MlpVerifier::init(&config.hidden, config.head(dataset.k())?, config.seed);
    let targets = build_targets(&model, &examples, &config.objective())?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = derive_rng(&[config.seed, 0x5401]);
    let mut adam = Adam::new(model.num_params(), config.learning_rate);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], &Target)> =
                chunk.iter().map(|&i| (examples[i].features.as_slice(), &targets[i])).collect();
            let (loss, grads) = batch_loss_and_grad(&model, &batch, config.loss);
            total += loss * chunk.len() as f64;
            seen += chunk.len();
            adam.update(&mut model, &grads);
        }
        epoch_losses.push(total / seen as f64);
    }
    Ok(TrainOutcome { model, epoch_losses })
}

pub const MODEL_FORMAT: &str = "structprior-model/1";

/// On-disk model: network, training configuration and provenance hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub layer_sizes: Vec<usize>,
    pub model: MlpVerifier,
    pub train_config: TrainConfig,
    pub dataset_header_hash: String,
    pub env_hash: String,
    pub epoch_losses: Vec<f64>,
}

impl ModelFile {
    pub fn new(outcome: &TrainOutcome, config: &TrainConfig, dataset: &Dataset) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            layer_sizes: outcome.model.layer_sizes(),
            model: outcome.model.clone(),
            train_config: config.clone(),
            dataset_header_hash: dataset.header.hash(),
            env_hash: dataset.header.env_hash.clone(),
            epoch_losses: outcome.epoch_losses.clone(),
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_reader(input).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Integrity(format!("unsupported model format `{}`", file.format)));
        }
        file.model.validate()?;
        if file.layer_sizes != file.model.layer_sizes() {
            return Err(Error::Integrity("layer_sizes disagree with the stored layers".into()));
        }
        Ok(file)
    }
}
