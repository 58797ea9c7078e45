use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::loss::{bce, mse, pixel_accuracy};
use super::{adam_step, AdamConfig, AdamState, EpochRecord, RunLog};
use crate::autodiff::Tape;
use crate::error::{invalid, Error, Result};
use crate::model::Model;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub monitor_mse: bool,
    pub monitor_accuracy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 32,
            epochs: 150,
            validation_fraction: 0.10,
            seed: 0,
            monitor_mse: true,
            monitor_accuracy: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate >= 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be a finite non-negative number"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(invalid("batch_size and epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Image/mask pairs, each `[1, C, H, W]` / `[1, 1, H, W]` with shared extents.
#[derive(Debug, Clone, Default)]
pub struct SegmentationSet {
    pub inputs: Vec<Tensor<f32>>,
    pub targets: Vec<Tensor<f32>>,
}

impl SegmentationSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: Tensor<f32>, target: Tensor<f32>) {
        self.inputs.push(input);
        self.targets.push(target);
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }

    fn batch<T: Scalar>(&self, indices: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        let xs: Vec<_> = indices.iter().map(|&i| &self.inputs[i]).collect();
        let ys: Vec<_> = indices.iter().map(|&i| &self.targets[i]).collect();
        Ok((Tensor::stack_batch(&xs)?.cast(), Tensor::stack_batch(&ys)?.cast()))
    }
}

/// `floor(n * fraction)` with a small tolerance so that products such as
/// `190_000 * 0.1` are not rounded down by representation error.
pub fn fraction_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction) + 1e-9).floor() as usize
}

/// Seeded permutation of `0..n`, split into `(rest, held_out)` with
/// `fraction_count(n, fraction)` held-out indices.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let held = fraction_count(n, fraction);
    let rest = idx.split_off(held);
    (rest, idx)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("numeric abort at epoch {epoch}, batch {batch}: non-finite value from `{op}`")]
    NonFinite {
        epoch: usize,
        batch: usize,
        op: &'static str,
        partial: RunLog,
    },
    #[error(transparent)]
    Other(#[from] Error),
}

struct PassStats {
    loss: f64,
    accuracy: f64,
    mse: f64,
}

/// Loss and monitors over `set` with parameters left untouched.
pub fn evaluate_loss<T: Scalar>(model: &Model<T>, set: &SegmentationSet, batch_size: usize) -> Result<(f64, f64, f64)> {
    let s = validation_pass(model, set, batch_size)?;
    Ok((s.loss, s.accuracy, s.mse))
}

fn validation_pass<T: Scalar>(model: &Model<T>, set: &SegmentationSet, batch_size: usize) -> Result<PassStats> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut acc = Accum::default();
    for chunk in idx.chunks(batch_size) {
        let (x, y) = set.batch::<T>(chunk)?;
        let p = model.predict(&x)?;
        acc.add(p.data(), y.data(), chunk.len(), None);
    }
    Ok(acc.finish())
}

#[derive(Default)]
struct Accum {
    loss: f64,
    acc: f64,
    mse: f64,
    n: usize,
}

impl Accum {
    fn add<T: Scalar>(&mut self, pred: &[T], target: &[T], samples: usize, loss: Option<f64>) {
        let w = samples as f64;
        self.loss += w * loss.unwrap_or_else(|| bce(pred, target));
        self.acc += w * pixel_accuracy(pred, target);
        self.mse += w * mse(pred, target);
        self.n += samples;
    }

    fn finish(&self) -> PassStats {
        let n = self.n as f64;
        PassStats {
            loss: self.loss / n,
            accuracy: self.acc / n,
            mse: self.mse / n,
        }
    }
}

/// Mini-batch Adam on binary cross-entropy.
///
/// `cfg.validation_fraction` of `data` (chosen by a seeded permutation) is
/// held out and scored after every epoch. The training part is reshuffled
/// every epoch from a stream derived from `(seed, epoch)`; the last partial
/// batch is kept.
pub fn fit<T: Scalar>(
    model: &mut Model<T>,
    state: &mut AdamState<T>,
    data: &SegmentationSet,
    cfg: &TrainConfig,
) -> Result<RunLog, FitError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("training set is empty").into());
    }
    let (train_idx, val_idx) = split_indices(data.len(), cfg.validation_fraction, cfg.seed);
    if train_idx.is_empty() {
        return Err(invalid("validation split leaves no training samples").into());
    }
    let val = data.subset(&val_idx);
    let mut log = RunLog::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order = train_idx.clone();
        order.shuffle(&mut epoch_rng(cfg.seed, epoch));
        let mut acc = Accum::default();

        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let abort = |op, log: &RunLog| FitError::NonFinite {
                epoch,
                batch: batch_no,
                op,
                partial: log.clone(),
            };
            let (x, y) = data.batch::<T>(chunk)?;
            let mut tape = Tape::new();
            let step = (|| -> Result<_> {
                let params = tape.bind(&model.params)?;
                let xv = tape.constant(x)?;
                let pred = model.forward(&mut tape, &params, xv)?;
                let loss = tape.bce_loss(pred, &y)?;
                Ok((pred, loss))
            })();
            let (pred, loss) = match step {
                Ok(v) => v,
                Err(Error::NonFinite { op }) => return Err(abort(op, &log)),
                Err(e) => return Err(e.into()),
            };
            let loss_value = tape.value(loss).data()[0].as_f64();
            acc.add(tape.value(pred).data(), y.data(), chunk.len(), Some(loss_value));

            let update = tape
                .backward(loss, &mut model.params)
                .and_then(|_| adam_step(&mut model.params, state, &cfg.adam));
            match update {
                Ok(()) => {}
                Err(Error::NonFinite { op }) => return Err(abort(op, &log)),
                Err(e) => return Err(e.into()),
            }
        }

        let train = acc.finish();
        let val_stats = if val.is_empty() {
            None
        } else {
            Some(validation_pass(model, &val, cfg.batch_size)?)
        };
        let mse = val_stats.as_ref().map_or(train.mse, |v| v.mse);
        log.records.push(EpochRecord {
            epoch,
            train_loss: train.loss,
            train_acc: cfg.monitor_accuracy.then_some(train.accuracy),
            val_loss: val_stats.as_ref().map(|v| v.loss),
            val_acc: val_stats.as_ref().filter(|_| cfg.monitor_accuracy).map(|v| v.accuracy),
            mse: cfg.monitor_mse.then_some(mse),
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts() {
        let (tr, va) = split_indices(200, 0.10, 7);
        assert_eq!((tr.len(), va.len()), (180, 20));
        assert_eq!(split_indices(200, 0.10, 7), (tr.clone(), va.clone()));
        let mut all: Vec<_> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        assert_eq!(fraction_count(190_000, 0.1), 19_000);
        assert_eq!(fraction_count(534, 0.7), 373);
        assert_eq!(fraction_count(534, 0.3), 160);
    }
}
