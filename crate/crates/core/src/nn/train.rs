//! Mini-batch training with a per-step WMM hook, entropy timelines, early
//! stopping, and full reproducibility from a master seed.
//!
//! RNG streams are partitioned per consumer (initialization, batch order,
//! WMM), so a run with a never-firing WMM config is bit-identical to a run
//! without one.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{accuracy, cross_entropy_loss, mse_loss, Loss};
use crate::nn::model::Model;
use crate::nn::optim::{apply_l2, clip_global_norm, Optimizer, OptimizerKind};
use crate::rng::{stream, RngState};
use crate::stats::{weight_entropy, EntropyTimeline, DEFAULT_BINS};
use crate::wmm::{apply_wmm_step, TargetSel, WmmConfig, WmmHost};

/// Global-norm gradient clip applied to recurrent models.
const RECURRENT_CLIP_NORM: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub loss: Loss,
    pub seed: u64,
    #[serde(default)]
    pub l2: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wmm: Option<WmmConfig>,
    #[serde(default = "default_bins")]
    pub entropy_bins: usize,
    /// Measure per-target entropy immediately before/after each WMM
    /// application and store it in the event log.
    #[serde(default = "default_true")]
    pub log_event_entropy: bool,
}

fn default_patience() -> usize {
    5
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::invalid(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if self.entropy_bins == 0 {
            return Err(Error::invalid("entropy_bins must be >= 1"));
        }
        if let Some(wmm) = &self.wmm {
            wmm.validate()?;
        }
        Ok(())
    }
}

/// Regression targets or class labels.
#[derive(Clone, Debug)]
pub enum Targets {
    Values(Array2<f64>),
    Labels(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Targets,
}

impl Dataset {
    pub fn regression(inputs: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(Error::shape(format!(
                "{} input rows vs {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        let n = targets.len();
        Ok(Dataset {
            inputs,
            targets: Targets::Values(targets.into_shape_with_order((n, 1)).expect("reshape")),
        })
    }

    pub fn classification(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} input rows vs {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        Ok(Dataset {
            inputs,
            targets: Targets::Labels(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(&self, idx: &[usize]) -> (Array2<f64>, Targets) {
        let x = self.inputs.select(Axis(0), idx);
        let t = match &self.targets {
            Targets::Values(v) => Targets::Values(v.select(Axis(0), idx)),
            Targets::Labels(l) => Targets::Labels(idx.iter().map(|&i| l[i]).collect()),
        };
        (x, t)
    }
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Diverged,
}

/// One WMM application during training, with optional entropy measurements
/// taken immediately before and after the weight mutation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmmEventRecord {
    pub step: usize,
    pub epoch: usize,
    pub target: String,
    pub mask_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_before: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_after: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub status: RunStatus,
    pub epochs_run: usize,
    /// Epoch whose parameters were selected by early stopping (0 = initial).
    pub best_epoch: usize,
    /// Mean mini-batch loss per completed epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss; index 0 is the pre-training evaluation.
    pub val_loss: Vec<f64>,
    /// Test loss at the early-stopping-selected parameters.
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// Network entropy (sum over tracked matrices) of the selected parameters.
    pub final_entropy_bits: Option<f64>,
    pub wmm_events: Vec<WmmEventRecord>,
    pub timeline: EntropyTimeline,
    pub wall_clock_seconds: f64,
}

fn eval_loss(model: &Model, data: &Dataset, loss: Loss) -> Result<f64> {
    let pred = model.predict(&data.inputs)?;
    match (&data.targets, loss) {
        (Targets::Values(t), Loss::Mse) => Ok(mse_loss(&pred, t)?.0),
        (Targets::Labels(l), Loss::CrossEntropy) => Ok(cross_entropy_loss(&pred, l)?.0),
        _ => Err(Error::config("loss kind does not match target kind")),
    }
}

fn batch_loss_and_grad(pred: &Array2<f64>, targets: &Targets, loss: Loss) -> Result<(f64, Array2<f64>)> {
    match (targets, loss) {
        (Targets::Values(t), Loss::Mse) => mse_loss(pred, t),
        (Targets::Labels(l), Loss::CrossEntropy) => cross_entropy_loss(pred, l),
        _ => Err(Error::config("loss kind does not match target kind")),
    }
}

fn network_entropy(model: &Model, targets: &[TargetSel], bins: usize) -> Result<f64> {
    let mut total = 0.0;
    for (_, view) in model.tracked_views(targets)? {
        total += weight_entropy(view, bins)?;
    }
    Ok(total)
}

/// Trains `model` in place and reports curves, events, and the test metric
/// at the early-stopping-selected parameters. Divergence (non-finite loss)
/// yields a `Diverged` report, not an error. On return the model holds the
/// selected (best-validation) parameters.
pub fn train(model: &mut Model, splits: &Splits, cfg: &TrainConfig) -> Result<TrainReport> {
    let start = Instant::now();
    cfg.validate()?;
    if splits.train.is_empty() || splits.val.is_empty() || splits.test.is_empty() {
        return Err(Error::invalid("all three splits must be nonempty"));
    }

    // resolve targets now: configuration errors must precede any training
    let tracked: Vec<TargetSel> = match &cfg.wmm {
        Some(wmm) => {
            model.resolve_targets(&wmm.targets)?;
            wmm.targets.clone()
        }
        None => model.default_targets(),
    };

    let mut rng_data = RngState::derive(cfg.seed, stream::DATA);
    let mut rng_wmm = RngState::derive(cfg.seed, stream::WMM);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);

    let mut timeline = EntropyTimeline::new();
    let record = |timeline: &mut EntropyTimeline, epoch: usize, model: &Model| -> Result<()> {
        let views = model.tracked_views(&tracked)?;
        timeline.record_epoch(epoch, &views, cfg.entropy_bins)
    };
    record(&mut timeline, 0, model)?;

    let mut val_loss = vec![eval_loss(model, &splits.val, cfg.loss)?];
    let mut train_loss = Vec::new();
    let mut events: Vec<WmmEventRecord> = Vec::new();

    let mut best = model.clone();
    let mut best_val = val_loss[0];
    let mut best_epoch = 0usize;
    let mut stale_epochs = 0usize;
    let mut status = RunStatus::Ok;
    let mut step = 0usize;
    let mut epochs_run = 0usize;

    let mut indices: Vec<usize> = (0..splits.train.len()).collect();
    'epochs: for epoch in 1..=cfg.epochs {
        rng_data.shuffle(&mut indices);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(cfg.batch_size) {
            let (x, t) = splits.train.gather(chunk);
            let pred = model.forward(&x)?;
            let (loss, dpred) = batch_loss_and_grad(&pred, &t, cfg.loss)?;
            if !loss.is_finite() {
                status = RunStatus::Diverged;
                epochs_run = epoch;
                break 'epochs;
            }
            epoch_loss += loss;
            batches += 1;

            model.zero_grads();
            model.backward(&dpred)?;
            let recurrent = model.is_recurrent();
            let mut slots = model.param_slots();
            if recurrent {
                clip_global_norm(&mut slots, RECURRENT_CLIP_NORM);
            }
            apply_l2(&mut slots, cfg.l2);
            optimizer.step(&mut slots);
            drop(slots);

            step += 1;
            if let Some(wmm) = &cfg.wmm {
                let keys = model.resolve_targets(&wmm.targets)?;
                let pre: Option<Vec<f64>> = if cfg.log_event_entropy {
                    Some(
                        keys.iter()
                            .map(|k| weight_entropy(model.matrix_view(k), cfg.entropy_bins))
                            .collect::<Result<_>>()?,
                    )
                } else {
                    None
                };
                let outcomes = apply_wmm_step(model, wmm, &mut rng_wmm)?;
                for (idx, outcome) in outcomes.iter().enumerate() {
                    if let Some(mask) = &outcome.mask {
                        let (before, after) = if let Some(pre) = &pre {
                            let after = weight_entropy(
                                model.matrix_view(&outcome.target),
                                cfg.entropy_bins,
                            )?;
                            (Some(pre[idx]), Some(after))
                        } else {
                            (None, None)
                        };
                        events.push(WmmEventRecord {
                            step,
                            epoch,
                            target: outcome.target.to_string(),
                            mask_count: mask.count(),
                            entropy_before: before,
                            entropy_after: after,
                        });
                    }
                }
            }
        }
        if status == RunStatus::Diverged {
            break;
        }
        epochs_run = epoch;
        train_loss.push(epoch_loss / batches.max(1) as f64);

        let val = eval_loss(model, &splits.val, cfg.loss)?;
        val_loss.push(val);
        record(&mut timeline, epoch, model)?;

        if val.is_finite() && val < best_val {
            best_val = val;
            best = model.clone();
            best_epoch = epoch;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    // evaluate the test metric exactly once, at the selected parameters
    *model = best;
    let (test_loss, test_accuracy, final_entropy) = if status == RunStatus::Ok {
        let loss = eval_loss(model, &splits.test, cfg.loss)?;
        let acc = match (&splits.test.targets, cfg.loss) {
            (Targets::Labels(l), Loss::CrossEntropy) => {
                Some(accuracy(&model.predict(&splits.test.inputs)?, l))
            }
            _ => None,
        };
        let entropy = network_entropy(model, &tracked, cfg.entropy_bins)?;
        (Some(loss), acc, Some(entropy))
    } else {
        (None, None, None)
    };

    Ok(TrainReport {
        status,
        epochs_run,
        best_epoch,
        train_loss,
        val_loss,
        test_loss,
        test_accuracy,
        final_entropy_bits: final_entropy,
        wmm_events: events,
        timeline,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
