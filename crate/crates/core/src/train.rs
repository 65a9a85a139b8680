//! Loss, tapes, backpropagation, optimizers and the epoch loop.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{batch_indices, Dataset, FoldedInput, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::layers::{at_layer, Activation, LayerSpec, TapeNode};
use crate::linalg::ComplexMatrix;
use crate::model::{argmax, ModelGraph};

/// Samples per parallel work unit. Fixed so the reduction order, and hence
/// every floating-point result, does not depend on the thread count.
pub const CHUNK: usize = 16;

/// Batch losses above this bound abort training.
pub fn divergence_bound() -> f64 {
    10.0 * (NUM_CLASSES as f64).ln()
}

/// Negative log-likelihood of `label` under `log_probs`.
pub fn nll_loss(log_probs: &[f64], label: usize) -> Result<f64> {
    if label >= log_probs.len() {
        return Err(Error::Value(format!(
            "label {label} outside 0..{}",
            log_probs.len()
        )));
    }
    Ok(-log_probs[label])
}

#[derive(Debug)]
struct SampleTape {
    nodes: Vec<TapeNode>,
    label: usize,
}

/// Forward caches for a batch, consumed by [`backward`].
#[derive(Debug)]
pub struct Tape {
    model_version: u64,
    layer_count: usize,
    samples: Vec<SampleTape>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One gradient buffer per layer, `None` for layers without weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<ComplexMatrix>>,
}

impl Gradients {
    pub fn zeros_for(model: &ModelGraph) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| l.spec.weight_shape().map(|(r, c)| ComplexMatrix::zeros(r, c)))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.re.iter_mut().zip(&b.re) {
                    *x += y;
                }
                for (x, y) in a.im.iter_mut().zip(&b.im) {
                    *x += y;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in self.layers.iter_mut().flatten() {
            m.re.iter_mut().chain(m.im.iter_mut()).for_each(|v| *v *= factor);
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flatten()
            .flat_map(|m| m.re.iter().chain(&m.im))
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

fn check_batch(model: &ModelGraph, batch: &[&FoldedInput]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(bad) = batch.iter().find(|it| it.vec.len() != model.input_dim()) {
        return Err(Error::shape("layer 0 (model input)", model.input_dim(), bad.vec.len()));
    }
    Ok(())
}

fn loss_of_output(out: Activation, label: usize) -> Result<f64> {
    nll_loss(&out.into_real("model output")?, label)
}

/// Mean NLL over `batch`, with the caches needed for [`backward`].
pub fn forward_loss(model: &ModelGraph, batch: &[&FoldedInput]) -> Result<(f64, Tape)> {
    check_batch(model, batch)?;
    let mut total = 0.0;
    let mut samples = Vec::with_capacity(batch.len());
    for item in batch {
        let (out, nodes) = model.forward_tape(&item.vec)?;
        let label = item.label as usize;
        total += loss_of_output(out, label)?;
        samples.push(SampleTape { nodes, label });
    }
    Ok((
        total / batch.len() as f64,
        Tape {
            model_version: model.version(),
            layer_count: model.layers.len(),
            samples,
        },
    ))
}

/// Gradient of the mean batch loss for every trainable parameter. The tape is
/// consumed; a tape recorded before the last parameter update is rejected.
pub fn backward(model: &ModelGraph, tape: Tape) -> Result<Gradients> {
    backward_with_hook(model, tape, |_, _, _| {})
}

/// Like [`backward`], calling `hook(layer, spec, grad_in)` with the gradient
/// at each layer's input before it is propagated further down. The hook may
/// modify the gradient.
pub fn backward_with_hook(
    model: &ModelGraph,
    tape: Tape,
    mut hook: impl FnMut(usize, &LayerSpec, &mut Activation),
) -> Result<Gradients> {
    if tape.model_version != model.version() || tape.layer_count != model.layers.len() {
        return Err(Error::StaleTape(format!(
            "tape recorded at model version {} ({} layers), model is at version {} ({} layers)",
            tape.model_version,
            tape.layer_count,
            model.version(),
            model.layers.len()
        )));
    }
    let mut grads = Gradients::zeros_for(model);
    let scale = 1.0 / tape.samples.len().max(1) as f64;
    for sample in &tape.samples {
        backprop_sample(model, sample, scale, &mut grads, true, &mut hook)?;
    }
    Ok(grads)
}

fn backprop_sample(
    model: &ModelGraph,
    sample: &SampleTape,
    scale: f64,
    grads: &mut Gradients,
    input_grad_at_first: bool,
    hook: &mut impl FnMut(usize, &LayerSpec, &mut Activation),
) -> Result<()> {
    if sample.nodes.len() != model.layers.len() {
        return Err(Error::StaleTape("tape does not cover every layer".into()));
    }
    let out_dim = model.output_dim();
    let mut grad = vec![0.0; out_dim];
    if sample.label >= out_dim {
        return Err(Error::Value(format!("label {} outside 0..{out_dim}", sample.label)));
    }
    grad[sample.label] = -scale;
    let mut grad = Activation::Real(grad);
    for (i, node) in sample.nodes.iter().enumerate().rev() {
        if node.layer != i {
            return Err(Error::StaleTape(format!(
                "tape node for layer {} found at position {i}",
                node.layer
            )));
        }
        let layer = &model.layers[i];
        let need_input = i > 0 || input_grad_at_first;
        let next = layer
            .backward_into(&node.cache, &grad, grads.layers[i].as_mut(), need_input)
            .map_err(|e| at_layer(i, e))?;
        match next {
            Some(mut g) => {
                hook(i, &layer.spec, &mut g);
                grad = g;
            }
            None => break,
        }
    }
    Ok(())
}

/// Mean loss and gradient over `batch`, evaluated in fixed-size chunks on the
/// rayon pool and reduced in chunk order.
pub fn loss_and_grad(model: &ModelGraph, batch: &[&FoldedInput]) -> Result<(f64, Gradients)> {
    check_batch(model, batch)?;
    let scale = 1.0 / batch.len() as f64;
    let partials: Vec<Result<(f64, Gradients)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = Gradients::zeros_for(model);
            let mut loss = 0.0;
            for item in chunk {
                let (out, nodes) = model.forward_tape(&item.vec)?;
                let label = item.label as usize;
                loss += loss_of_output(out, label)?;
                let sample = SampleTape { nodes, label };
                backprop_sample(model, &sample, scale, &mut grads, false, &mut |_, _, _| {})?;
            }
            Ok((loss, grads))
        })
        .collect();
    let mut total_loss = 0.0;
    let mut total = Gradients::zeros_for(model);
    for p in partials {
        let (l, g) = p?;
        total_loss += l;
        total.add_assign(&g);
    }
    Ok((total_loss * scale, total))
}

/// Loss, correctness and log-probabilities of one sample.
type Scored = (f64, bool, Vec<f64>);

/// Mean loss, accuracy and per-sample log-probabilities over a dataset.
pub fn score(model: &ModelGraph, ds: &Dataset) -> Result<(f64, f64, Vec<Vec<f64>>)> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty dataset".into()));
    }
    let outputs: Vec<Result<Vec<Scored>>> = ds
        .items
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|item| {
                    let lp = model.log_probs(&item.vec)?;
                    let label = item.label as usize;
                    let loss = nll_loss(&lp, label)?;
                    Ok((loss, argmax(&lp) == label, lp))
                })
                .collect()
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut all = Vec::with_capacity(ds.len());
    for chunk in outputs {
        for (l, ok, lp) in chunk? {
            loss += l;
            correct += usize::from(ok);
            all.push(lp);
        }
    }
    let n = ds.len() as f64;
    Ok((loss / n, correct as f64 / n, all))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer '{other}'"))),
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Constant-rate SGD or Adam over every real parameter component.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step(&mut self, model: &mut ModelGraph, grads: &Gradients) {
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (i, w) in model.weights_mut() {
                    let g = grads.layers[i].as_ref().expect("gradient for trainable layer");
                    for (p, d) in w.re.iter_mut().zip(&g.re).chain(w.im.iter_mut().zip(&g.im)) {
                        *p -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.step += 1;
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                let lazy_init = self.first.is_empty();
                for (slot, (i, w)) in model.weights_mut().enumerate() {
                    let g = grads.layers[i].as_ref().expect("gradient for trainable layer");
                    if lazy_init {
                        self.first.push(vec![0.0; 2 * w.len()]);
                        self.second.push(vec![0.0; 2 * w.len()]);
                    }
                    let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
                    let params = w.re.iter_mut().chain(w.im.iter_mut());
                    let grads = g.re.iter().chain(&g.im);
                    for (((p, d), m), v) in params.zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * d;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * d * d;
                        let mhat = *m / c1;
                        let vhat = *v / c2;
                        *p -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Epochs without test-loss improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            patience: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// CSV with columns `epoch,train_loss,test_loss,test_accuracy`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "test_loss", "test_accuracy"])?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.test_loss.to_string(),
                r.test_accuracy.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64)
}

/// Trains `model` in place. Stops after `config.epochs` epochs or once the
/// test loss has not improved for `config.patience` consecutive epochs.
/// `on_epoch` sees every completed epoch.
pub fn train(
    model: &mut ModelGraph,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if test_set.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate);
    let mut history = TrainHistory::default();
    let mut best = f64::INFINITY;
    let mut stall = 0;
    for epoch in 1..=config.epochs {
        let batches = batch_indices(train_set.len(), config.batch_size, epoch_seed(config.seed, epoch))?;
        let mut loss_sum = 0.0;
        for (step, idx) in batches.iter().enumerate() {
            let batch: Vec<&FoldedInput> = idx.iter().map(|&i| &train_set.items[i]).collect();
            let (loss, grads) = loss_and_grad(model, &batch)?;
            if !loss.is_finite() || loss > divergence_bound() {
                return Err(Error::Divergence { epoch, step, loss });
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(model, &grads);
        }
        let (test_loss, test_accuracy, _) = score(model, test_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            test_loss,
            test_accuracy,
        };
        on_epoch(&record);
        history.epochs.push(record);
        if test_loss < best {
            best = test_loss;
            stall = 0;
        } else {
            stall += 1;
            if stall >= config.patience {
                break;
            }
        }
    }
    Ok(history)
}
