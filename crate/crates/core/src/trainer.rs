//! Mini-batch Adam training with softmax cross-entropy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{relu_grad, Layer, NetworkParams};
use crate::regions::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub shuffle_seed: u64,
    /// Epochs after which the recorder runs; 0 is the untouched init.
    pub record_epochs: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            shuffle_seed: 0,
            record_epochs: vec![0, 100],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidManifest(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0 < self.adam_beta1 && self.adam_beta1 < 1.0 && 0.0 < self.adam_beta2 && self.adam_beta2 < 1.0) {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !self.record_epochs.windows(2).all(|w| w[0] < w[1]) {
            return bad("record_epochs must be strictly increasing");
        }
        if self.record_epochs.last().is_some_and(|&e| e > self.epochs) {
            return bad("record_epochs must not exceed epochs");
        }
        Ok(())
    }
}

/// `-log softmax(logits)[label]`, stabilized by max subtraction.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::InvalidLabel {
            label,
            classes: logits.len(),
        });
    }
    let top = argmax(logits);
    let max = logits[top];
    // ln(1 + rest) keeps precision when one logit dominates.
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, z)| (z - max).exp())
        .sum();
    Ok((max - logits[label]) + rest.ln_1p())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Parameter-shaped gradient (or moment) buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

/// Mean cross-entropy gradient over `batch` together with the mean loss.
pub fn backward(params: &NetworkParams, batch: &[(&[f64], usize)]) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidDataset("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0;
    let n_layers = params.layers.len();
    for &(x, label) in batch {
        let trace = params.forward_trace(x)?;
        loss += cross_entropy_loss(&trace.logits, label)?;
        let mut delta = softmax(&trace.logits);
        delta[label] -= 1.0;
        for li in (0..n_layers).rev() {
            let layer = &params.layers[li];
            let g = &mut grads.layers[li];
            let input: Vec<f64> = if li == 0 {
                x.to_vec()
            } else {
                trace.pre[li - 1].iter().map(|&z| crate::nn::relu(z)).collect()
            };
            for r in 0..layer.rows {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                g.bias[r] += d;
                let row = &mut g.weights[r * layer.cols..(r + 1) * layer.cols];
                for (gw, xi) in row.iter_mut().zip(&input) {
                    *gw += d * xi;
                }
            }
            if li > 0 {
                let pre = &trace.pre[li - 1];
                delta = (0..layer.cols)
                    .map(|c| {
                        let back: f64 = (0..layer.rows).map(|r| layer.weight(r, c) * delta[r]).sum();
                        back * relu_grad(pre[c])
                    })
                    .collect();
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((grads, loss * inv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        AdamState {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut NetworkParams, grads: &Gradients, state: &mut AdamState, config: &TrainConfig) {
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let lr = config.learning_rate;
    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m.layers)
        .zip(&mut state.v.layers)
    {
        let ps = p.weights.iter_mut().chain(p.bias.iter_mut());
        let gs = g.weights.iter().chain(&g.bias);
        let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
        let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
        for (((p, &g), m), v) in ps.zip(gs).zip(ms).zip(vs) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
}

/// Per-epoch permutations of `0..n` from one seeded stream.
pub struct EpochShuffler {
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl EpochShuffler {
    pub fn new(n: usize, seed: u64) -> Self {
        EpochShuffler {
            order: (0..n).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}

/// Extra statistics a recorder attaches to an epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecordExtras {
    pub region_count: Option<usize>,
    pub line_count: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub accuracy: f64,
    pub loss: f64,
    pub region_count: Option<usize>,
    pub line_count: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn get(&self, epoch: usize) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == epoch)
    }

    /// `epoch,accuracy,loss,region_count,line_count`; absent values are
    /// empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,accuracy,loss,region_count,line_count\n");
        for r in &self.records {
            let rc = r.region_count.map(|c| c.to_string()).unwrap_or_default();
            let lc = r.line_count.map(|c| c.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", r.epoch, r.accuracy, r.loss, rc, lc).unwrap();
        }
        out
    }
}

/// Mean loss and accuracy of `params` over a labelled set.
pub fn evaluate(params: &NetworkParams, inputs: &[Vec<f64>], labels: &[usize]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in inputs.iter().zip(labels) {
        let logits = params.forward(x)?;
        loss += cross_entropy_loss(&logits, y)?;
        if argmax(&logits) == y {
            correct += 1;
        }
    }
    let n = inputs.len().max(1) as f64;
    Ok((correct as f64 / n, loss / n))
}

/// Train for `config.epochs` passes of shuffled mini-batch Adam. The last
/// partial batch of each epoch is kept. `recorder` runs at every epoch in
/// `config.record_epochs` (0 = before any update) with the current params.
pub fn train_run<R>(
    mut params: NetworkParams,
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
    mut recorder: R,
) -> Result<(TrainLog, NetworkParams)>
where
    R: FnMut(usize, &NetworkParams) -> Result<RecordExtras>,
{
    config.validate()?;
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "{} inputs vs {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= params.spec.output_dim) {
        return Err(Error::InvalidLabel {
            label: bad,
            classes: params.spec.output_dim,
        });
    }

    let mut log = TrainLog::default();
    let mut record = |epoch: usize, params: &NetworkParams, log: &mut TrainLog| -> Result<()> {
        if config.record_epochs.binary_search(&epoch).is_ok() {
            let (accuracy, loss) = evaluate(params, inputs, labels)?;
            let extras = recorder(epoch, params)?;
            log.records.push(EpochRecord {
                epoch,
                accuracy,
                loss,
                region_count: extras.region_count,
                line_count: extras.line_count,
            });
        }
        Ok(())
    };

    record(0, &params, &mut log)?;
    let mut state = AdamState::new(&params);
    let mut shuffler = EpochShuffler::new(inputs.len(), config.shuffle_seed);
    let mut batch: Vec<(&[f64], usize)> = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        let order = shuffler.next_epoch();
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (inputs[i].as_slice(), labels[i])));
            let (grads, _) = backward(&params, &batch)?;
            adam_step(&mut params, &grads, &mut state, config);
        }
        record(epoch, &params, &mut log)?;
    }
    Ok((log, params))
}
