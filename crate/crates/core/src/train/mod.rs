//! Masked-item training with Adam and early stopping.

mod adam;

pub use adam::{adam_step, clip_global_norm, AdamState};

use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::SplitDataset;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, Metric, ModelScorer, Split};
use crate::masking::{mask_epoch, MaskedBatch, IGNORE};
use crate::model::{encode, output_logits, save_checkpoint, BoundParams, Mode, ModelConfig, ModelParams};
use crate::rng::{domain, stream};
use crate::tensor::{Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Share of real positions selected for masking.
    pub rho: f64,
    pub seed: u64,
    /// Validation metric for early stopping and best-params tracking.
    pub selection_metric: String,
    pub grad_clip: Option<f64>,
    /// Where to write the best params whenever they improve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    /// Student settings: lr 1e-4, batch 32, up to 150 epochs, patience 5.
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            max_epochs: 150,
            patience: 5,
            rho: 0.35,
            seed: 0,
            selection_metric: "NDCG@10".into(),
            grad_clip: None,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    /// Teacher fine-tuning settings (lr 2e-5).
    pub fn teacher() -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<Metric> {
        let bad = |m: String| Err(Error::param(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} = {b} outside (0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("mask ratio {} outside (0, 1)", self.rho));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip {c} must be positive"));
            }
        }
        self.selection_metric.parse()
    }
}

/// Mean masked cross-entropy, pooled over every labelled position.
pub fn mlm_loss(tape: &mut Tape<'_>, logits: Var, labels: &[i64]) -> Result<Var> {
    let (loss, count) = tape.cross_entropy_masked(logits, labels, IGNORE)?;
    if count == 0 {
        return Err(Error::contract("batch has no masked positions"));
    }
    Ok(loss)
}

/// Stops after `patience` epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records a metric; returns whether it is a new best.
    pub fn observe(&mut self, metric: f64) -> bool {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far, across epochs.
    pub step: usize,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
}

/// A training loss over one masked batch.
pub(crate) trait Objective {
    fn loss(
        &self,
        tape: &mut Tape<'_>,
        bound: &BoundParams,
        config: &ModelConfig,
        batch: &MaskedBatch,
        mode: &mut Mode<'_>,
    ) -> Result<Var>;
}

/// Plain masked-item prediction.
pub(crate) struct Mlm;

impl Objective for Mlm {
    fn loss(
        &self,
        tape: &mut Tape<'_>,
        bound: &BoundParams,
        config: &ModelConfig,
        batch: &MaskedBatch,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let hidden = encode(tape, bound, config, &batch.inputs, batch.batch_size, mode)?;
        let picked = tape.select_rows(hidden, &batch.target_rows())?;
        let logits = output_logits(tape, bound, picked)?;
        mlm_loss(tape, logits, &batch.target_labels())
    }
}

/// Shared epoch loop: re-mask, shuffle, optimize, validate, keep the best.
pub(crate) fn fit(
    mut params: ModelParams,
    config: &ModelConfig,
    dataset: &SplitDataset,
    cfg: &TrainConfig,
    objective: &impl Objective,
    mut log: Option<&mut dyn Write>,
) -> Result<(ModelParams, History)> {
    let metric = cfg.validate()?;
    config.validate()?;
    if dataset.users.is_empty() {
        return Err(Error::data("dataset has no users"));
    }
    if config.vocab_size != dataset.vocab_size || config.max_len != dataset.max_len {
        return Err(Error::Config(format!(
            "model expects vocabulary {} and length {}, dataset has {} and {}",
            config.vocab_size, config.max_len, dataset.vocab_size, dataset.max_len
        )));
    }
    let sequences: Vec<&[u32]> = dataset.users.iter().map(|u| u.train.as_slice()).collect();
    let mut state = AdamState::new(&params);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut history = History {
        epochs: Vec::new(),
        best_epoch: 0,
        best_metric: f64::NEG_INFINITY,
        stopped_early: false,
    };
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "epoch,step,loss,metric")?;
    }
    let mut step = 0usize;
    for epoch in 1..=cfg.max_epochs {
        let masked = mask_epoch(&sequences, cfg.rho, dataset.vocab_size, cfg.seed, epoch as u64)?;
        let mut order: Vec<usize> = (0..masked.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &[domain::SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = MaskedBatch::stack(chunk.iter().map(|&i| &masked[i]))?;
            let mut rng = stream(cfg.seed, &[domain::DROPOUT, epoch as u64, step as u64]);
            let (loss, mut grads) = {
                let mut tape = Tape::new();
                let bound = params.bind(&mut tape);
                let loss = objective.loss(&mut tape, &bound, config, &batch, &mut Mode::Train(&mut rng))?;
                (tape.value(loss).item()?, tape.backward(loss)?)
            };
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss became {loss} at epoch {epoch}, step {step}"
                )));
            }
            let mut g = params.gradients(&mut grads);
            if let Some(c) = cfg.grad_clip {
                clip_global_norm(&mut g, c);
            }
            adam_step(&mut params, &g, &mut state, cfg).map_err(|e| match e {
                Error::Training(m) => Error::Training(format!("{m} at epoch {epoch}, step {step}")),
                other => other,
            })?;
            total += loss;
            batches += 1;
            step += 1;
        }
        let report = evaluate(&ModelScorer { params: &params, config }, dataset, Split::Val, &[metric.k])?;
        let value = report.metric(metric).expect("requested metric");
        let record = EpochRecord {
            epoch,
            step,
            loss: total / batches as f64,
            metric: value,
        };
        log::debug!("epoch {epoch}: loss {:.5} {metric} {value:.5}", record.loss);
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{},{},{},{}", record.epoch, record.step, record.loss, record.metric)?;
        }
        history.epochs.push(record);
        if stopper.observe(value) {
            best.clone_from(&params);
            history.best_epoch = epoch;
            history.best_metric = value;
            if let Some(path) = &cfg.checkpoint_path {
                save_checkpoint(&best, config, path)?;
            }
        } else if stopper.should_stop() {
            history.stopped_early = true;
            break;
        }
    }
    Ok((best, history))
}

/// Trains `init` on the dataset's training views and returns the params
/// with the best validation metric.
pub fn train(
    init: ModelParams,
    config: &ModelConfig,
    dataset: &SplitDataset,
    cfg: &TrainConfig,
    log: Option<&mut dyn Write>,
) -> Result<(ModelParams, History)> {
    fit(init, config, dataset, cfg, &Mlm, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_needs_strict_improvement() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(0.5));
        assert!(!s.observe(0.5));
        assert!(!s.should_stop());
        assert!(s.observe(0.6));
        assert!(!s.observe(0.1));
        assert!(!s.observe(0.6));
        assert!(s.should_stop());
        assert_eq!(s.best(), Some(0.6));
    }

    #[test]
    fn patience_one_stops_at_epoch_two() {
        let mut s = EarlyStopping::new(1);
        let metrics = [0.4, 0.3, 0.2];
        let stopped = metrics
            .iter()
            .enumerate()
            .find_map(|(i, &m)| (!s.observe(m) && s.should_stop()).then_some(i + 1));
        assert_eq!(stopped, Some(2));
    }

    #[test]
    fn config_validation() {
        assert_eq!(TrainConfig::default().validate().unwrap(), Metric::ndcg(10));
        let bad = TrainConfig {
            rho: 1.0,
            ..TrainConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().kind(), "parameter");
        let bad = TrainConfig {
            selection_metric: "MAP@3".into(),
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let mut tape = Tape::new();
        let z = tape.constant(crate::Tensor::zeros([3, 7]));
        let loss = mlm_loss(&mut tape, z, &[2, IGNORE, 6]).unwrap();
        assert!((tape.value(loss).item().unwrap() - 7f64.ln()).abs() < 1e-14);
        let z = tape.constant(crate::Tensor::zeros([1, 7]));
        assert_eq!(mlm_loss(&mut tape, z, &[IGNORE]).unwrap_err().kind(), "contract");
    }
}
