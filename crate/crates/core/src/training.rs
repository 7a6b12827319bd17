//! Losses, optimizers, early stopping and the training loop.
//!
//! A mini-batch is split into fixed-size chunks of consumers. Chunks are
//! differentiated in parallel and their losses and gradients are summed in
//! chunk order, so results do not depend on the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{pad_and_mask, Example, PaddedBatch};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::network::{forward_on, HeadKind, NetworkConfig, TapeForward};
use crate::numerics::{grad, Matrix, ParamSet, Rng, Tape, Var};

/// Clamp applied to probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Bce,
    Conditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Share of training consumers held out to drive early stopping.
    pub val_fraction: f64,
    /// Consumers per parallel work unit.
    pub chunk_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 1000,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adam,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            loss: LossKind::Bce,
            val_fraction: 0.1,
            chunk_size: 32,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.chunk_size == 0 {
            return Err(Error::config("batch and chunk sizes must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::config("val_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

pub fn bce(y_hat: f64, y: f64) -> f64 {
    let p = y_hat.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// The conditional term alone, without the cross-entropy.
pub fn conditional_term(y_a: f64, y_w: f64, y: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("delinquency ratio {r} outside [0, 1]")));
    }
    Ok(y * (1.0 - y_a) * (1.0 - y_w) + (1.0 - y) * (y_a * y_a + (r - y_w) * (r - y_w)))
}

pub fn conditional_loss(y_hat: f64, y_a: f64, y_w: f64, y: f64, r: f64) -> Result<f64> {
    Ok(bce(y_hat, y) + conditional_term(y_a, y_w, y, r)?)
}

/// Concatenate the first `steps` `(1, B)` rows into one `(1, steps * B)` row.
fn flat_row(rows: &[Matrix]) -> Matrix {
    let b = rows.first().map_or(0, Matrix::cols);
    Matrix::from_fn(1, rows.len() * b, |_, c| rows[c / b].get(0, c % b))
}

fn bce_on(tape: &mut Tape, y_hat: Var, y: &Matrix) -> Result<Var> {
    let p = tape.clamp(y_hat, PROB_EPS, 1.0 - PROB_EPS);
    let ln_p = tape.ln(p);
    let q = tape.rsub_scalar(1.0, p);
    let ln_q = tape.ln(q);
    let yv = tape.constant(y.clone());
    let not_y = tape.constant(y.map(|v| 1.0 - v));
    let a = tape.mul(yv, ln_p)?;
    let b = tape.mul(not_y, ln_q)?;
    let s = tape.add(a, b)?;
    Ok(tape.scale(s, -1.0))
}

fn conditional_on(tape: &mut Tape, y_a: Var, y_w: Var, y: &Matrix, r: &Matrix) -> Result<Var> {
    let yv = tape.constant(y.clone());
    let not_y = tape.constant(y.map(|v| 1.0 - v));
    let rv = tape.constant(r.clone());
    let one_a = tape.rsub_scalar(1.0, y_a);
    let one_w = tape.rsub_scalar(1.0, y_w);
    let both = tape.mul(one_a, one_w)?;
    let pos = tape.mul(yv, both)?;
    let sq_a = tape.square(y_a);
    let gap = tape.sub(rv, y_w)?;
    let sq_w = tape.square(gap);
    let neg = tape.add(sq_a, sq_w)?;
    let neg = tape.mul(not_y, neg)?;
    tape.add(pos, neg)
}

/// Sum of per-step losses over valid steps, not yet normalized.
pub fn summed_loss_on(tape: &mut Tape, f: &TapeForward, batch: &PaddedBatch, loss: LossKind) -> Result<Var> {
    let y = flat_row(&batch.y[..f.steps]);
    let mask = flat_row(&batch.mask[..f.steps]);
    let mut per_step = bce_on(tape, f.y_hat, &y)?;
    if loss == LossKind::Conditional {
        let parts = f
            .parts
            .ok_or_else(|| Error::config("conditional loss needs the decomposed head"))?;
        let r = flat_row(&batch.r[..f.steps]);
        if let Some(bad) = r.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("delinquency ratio {bad} outside [0, 1]")));
        }
        let extra = conditional_on(tape, parts.y_a, parts.y_w, &y, &r)?;
        per_step = tape.add(per_step, extra)?;
    }
    let m = tape.constant(mask);
    let masked = tape.mul(per_step, m)?;
    Ok(tape.sum(masked))
}

/// Mean over consumers of the summed per-step loss.
pub fn batch_loss(cfg: &NetworkConfig, params: &ParamSet, batch: &PaddedBatch, loss: LossKind) -> Result<f64> {
    if batch.batch == 0 {
        return Err(Error::domain("empty batch"));
    }
    let mut tape = Tape::new();
    let p = cfg.constants(&mut tape, params)?;
    let f = forward_on(cfg, &mut tape, &p, batch)?;
    let s = summed_loss_on(&mut tape, &f, batch, loss)?;
    Ok(tape.value(s).item() / batch.batch as f64)
}

/// Summed loss and its gradient for one padded chunk.
pub fn chunk_grad(cfg: &NetworkConfig, params: &ParamSet, batch: &PaddedBatch, loss: LossKind) -> Result<(f64, ParamSet)> {
    grad(params, |tape, bound| {
        let p = cfg.bind(bound)?;
        let f = forward_on(cfg, tape, &p, batch)?;
        summed_loss_on(tape, &f, batch, loss)
    })
}

fn check_loss(cfg: &NetworkConfig, loss: LossKind) -> Result<()> {
    if loss == LossKind::Conditional && cfg.head != HeadKind::Decomposed {
        return Err(Error::config("conditional loss needs the decomposed head"));
    }
    Ok(())
}

/// Mean loss and gradient over `examples`, computed chunk by chunk.
pub fn loss_and_grad(
    cfg: &NetworkConfig,
    params: &ParamSet,
    examples: &[&Example],
    loss: LossKind,
    chunk_size: usize,
) -> Result<(f64, ParamSet)> {
    if examples.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    check_loss(cfg, loss)?;
    let spec = cfg.pad_spec();
    let parts: Vec<Result<(f64, ParamSet)>> = examples
        .par_chunks(chunk_size.max(1))
        .map(|c| chunk_grad(cfg, params, &pad_and_mask(c, &spec)?, loss))
        .collect();
    let mut total = 0.0;
    let mut sum = params.zeros_like();
    for p in parts {
        let (l, g) = p?;
        total += l;
        sum.add_scaled(&g, 1.0)?;
    }
    let n = examples.len() as f64;
    let mut mean = params.zeros_like();
    mean.add_scaled(&sum, 1.0 / n)?;
    Ok((total / n, mean))
}

/// One scored step.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub example: usize,
    pub step: usize,
    pub y: f64,
    pub r: f64,
    pub y_hat: f64,
    pub parts: Option<[f64; 3]>,
}

/// Scores for every valid step, ordered by example then step.
pub fn predict(cfg: &NetworkConfig, params: &ParamSet, examples: &[Example], chunk_size: usize) -> Result<Vec<Scored>> {
    cfg.check(params)?;
    let spec = cfg.pad_spec();
    let chunk_size = chunk_size.max(1);
    let refs: Vec<&Example> = examples.iter().collect();
    let parts: Vec<Result<Vec<Scored>>> = refs
        .par_chunks(chunk_size)
        .enumerate()
        .map(|(k, chunk)| {
            let batch = pad_and_mask(chunk, &spec)?;
            let out = crate::network::forward(cfg, params, &batch)?;
            Ok(out
                .risk
                .steps
                .into_iter()
                .map(|s| Scored {
                    example: k * chunk_size + s.example,
                    step: s.step,
                    y: batch.y[s.step].get(0, s.example),
                    r: batch.r[s.step].get(0, s.example),
                    y_hat: s.y_hat,
                    parts: s.parts,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean per-consumer loss of already-scored steps.
pub fn scored_loss(scores: &[Scored], n_examples: usize, loss: LossKind) -> Result<f64> {
    let mut total = 0.0;
    for s in scores {
        total += bce(s.y_hat, s.y);
        if loss == LossKind::Conditional {
            let [a, w, _] = s
                .parts
                .ok_or_else(|| Error::config("conditional loss needs the decomposed head"))?;
            total += conditional_term(a, w, s.y, s.r)?;
        }
    }
    Ok(total / n_examples.max(1) as f64)
}

/// Per-parameter optimizer accumulators.
#[derive(Clone, Debug)]
pub struct OptState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step: u64,
    first: ParamSet,
    second: ParamSet,
}

impl OptState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const RHO: f64 = 0.9;
    pub const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ParamSet) -> Self {
        OptState {
            kind,
            learning_rate,
            step: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn apply(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_layout(grads, "optimizer step")?;
        params.check_layout(&self.first, "optimizer step")?;
        self.step += 1;
        let lr = self.learning_rate;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - Self::BETA1.powi(t), 1.0 - Self::BETA2.powi(t));
        let kind = self.kind;
        let entries = params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.first.iter_mut().zip(self.second.iter_mut()));
        for (((_, p), (_, g)), ((_, m), (_, v))) in entries {
            let slots = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((p, g), (m, v)) in slots {
                match kind {
                    OptimizerKind::Adam => {
                        *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                        *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                    }
                    OptimizerKind::Rmsprop => {
                        *v = Self::RHO * *v + (1.0 - Self::RHO) * g * g;
                        *p -= lr * g / (v.sqrt() + Self::EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Patience-based stopping on a score where higher is better.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    /// Record an epoch's score; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, score: f64) -> (bool, bool) {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.waited = 0;
            (true, false)
        } else {
            self.waited += 1;
            (false, self.waited >= self.patience)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamSet,
    pub initial_loss: f64,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auc: f64,
}

/// Validation AUC, or NaN when the validation steps hold a single class.
pub fn scored_auc(scores: &[Scored]) -> f64 {
    let pairs: Vec<(f64, bool)> = scores.iter().map(|s| (s.y_hat, s.y == 1.0)).collect();
    auc(&pairs).unwrap_or(f64::NAN)
}

/// Train from a seeded initialization; returns the best-validation weights.
///
/// Early stopping follows validation AUC. If the validation steps hold only
/// one class the negative validation loss is followed instead.
pub fn train(tc: &TrainingConfig, cfg: &NetworkConfig, train_set: &[Example], val_set: &[Example]) -> Result<TrainOutcome> {
    tc.validate()?;
    cfg.validate()?;
    check_loss(cfg, tc.loss)?;
    if train_set.is_empty() {
        return Err(Error::domain("empty training split"));
    }
    let mut rng = Rng::new(tc.seed);
    let mut params = cfg.init(&mut rng.fork())?;
    let mut shuffle = rng.fork();
    let mut opt = OptState::new(tc.optimizer, tc.learning_rate, &params);
    let all: Vec<&Example> = train_set.iter().collect();
    let initial = predict(cfg, &params, train_set, tc.chunk_size)?;
    let initial_loss = scored_loss(&initial, train_set.len(), tc.loss)?;

    let mut stop = EarlyStopping::new(tc.patience);
    let mut best = params.clone();
    let mut best_val_auc = f64::NAN;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..all.len()).collect();
    for epoch in 1..=tc.max_epochs {
        shuffle.shuffle(&mut order);
        let mut weighted = 0.0;
        for (k, idx) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| all[i]).collect();
            let (loss, g) = loss_and_grad(cfg, &params, &batch, tc.loss, tc.chunk_size)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: k,
                    first_item: batch[0].id.clone(),
                    last_item: batch[batch.len() - 1].id.clone(),
                });
            }
            weighted += loss * batch.len() as f64;
            opt.apply(&mut params, &g)?;
        }
        let train_loss = weighted / all.len() as f64;
        let (val_loss, val_auc) = if val_set.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let scores = predict(cfg, &params, val_set, tc.chunk_size)?;
            (scored_loss(&scores, val_set.len(), tc.loss)?, scored_auc(&scores))
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_auc,
        });
        let score = if val_auc.is_finite() {
            val_auc
        } else if val_loss.is_finite() {
            -val_loss
        } else {
            -train_loss
        };
        let (improved, done) = stop.observe(epoch, score);
        if improved {
            best = params.clone();
            best_val_auc = val_auc;
        }
        if done {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best,
        initial_loss,
        history,
        best_epoch: stop.best_epoch,
        best_val_auc,
    })
}

/// Split `examples` into (train, validation) by a seeded shuffle.
pub fn holdout(examples: &[Example], fraction: f64, seed: u64) -> (Vec<Example>, Vec<Example>) {
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    Rng::new(seed).shuffle(&mut idx);
    let n_val = if fraction > 0.0 && examples.len() > 1 {
        ((examples.len() as f64 * fraction).round() as usize).clamp(1, examples.len() - 1)
    } else {
        0
    };
    let (val, train) = idx.split_at(n_val);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (
        train.iter().map(|&i| examples[i].clone()).collect(),
        val.iter().map(|&i| examples[i].clone()).collect(),
    )
}

pub fn write_history(w: impl std::io::Write, history: &[EpochRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in history {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::io("<history>", e))?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::domain(format!("csv: {other:?}")),
    }
}
