//! Mini-batch training with validation-AUC early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, RngState};
use crate::error::{ModelError, Result};
use crate::optim::{adamw_step, cosine_lr, AdamState};
use crate::tape::{LossMix, Tape};
use crate::tensor::Mat;
use crate::transformer::{Mode, Model, ModelConfig, Prediction};
use nvi_core::rng;
use nvi_core::stats::roc_auc;
use nvi_core::synth::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub t_max: usize,
    pub eta_min: f64,
    pub patience: usize,
    /// `None` uses `n_neg / n_pos` of the training split.
    pub pos_weight: Option<f64>,
    pub loss_mix: LossMix,
    pub batch_size: usize,
    pub seed: u64,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-2,
            t_max: 100,
            eta_min: 1e-5,
            patience: 25,
            pos_weight: None,
            loss_mix: LossMix::default(),
            batch_size: 32,
            seed: 42,
            max_epochs: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if !(self.lr > 0.0 && self.eta_min >= 0.0 && self.weight_decay >= 0.0) {
            return bad("learning rates must be positive and decay non-negative");
        }
        if self.pos_weight.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
            return bad("pos_weight must be positive");
        }
        let mix = self.loss_mix;
        if mix.mse < 0.0 || mix.bce < 0.0 || ((mix.mse + mix.bce) - 1.0).abs() > 1e-9 {
            return bad("loss mix weights must be non-negative and sum to 1");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        Ok(())
    }
}

/// One split: channel-major windows with targets and labels.
#[derive(Debug, Clone, Default)]
pub struct SplitData<'a> {
    pub windows: Vec<&'a [f64]>,
    pub targets: Vec<f64>,
    pub labels: Vec<bool>,
}

impl<'a> SplitData<'a> {
    pub fn from_indices(ds: &'a Dataset, idx: &[usize]) -> Self {
        Self {
            windows: idx.iter().map(|&i| ds.windows[i].channels.as_slice()).collect(),
            targets: idx.iter().map(|&i| ds.windows[i].nvi_target).collect(),
            labels: idx.iter().map(|&i| ds.windows[i].label.is_nvi()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: Model,
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// History as JSON lines.
pub fn history_jsonl(history: &[EpochRecord]) -> String {
    history
        .iter()
        .map(|r| serde_json::to_string(r).expect("plain struct serialises") + "\n")
        .collect()
}

fn stack(tokens: &[Mat], idx: &[usize]) -> Mat {
    let (t, c) = (tokens[0].rows, tokens[0].cols);
    let mut out = Mat::zeros(idx.len() * t, c);
    for (b, &i) in idx.iter().enumerate() {
        out.data[b * t * c..(b + 1) * t * c].copy_from_slice(&tokens[i].data);
    }
    out
}

/// Eval-mode predictions on precomputed tokens.
fn predict_tokens(model: &Model, tokens: &[Mat], batch: usize) -> Result<Vec<Prediction>> {
    let idx: Vec<usize> = (0..tokens.len()).collect();
    let mut out = Vec::with_capacity(tokens.len());
    for chunk in idx.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        let g = model.build(&mut tape, stack(tokens, chunk), Mode::Eval, None)?;
        out.extend(tape.value(g.logits).data.iter().map(|&z| Prediction::from_logit(z)));
    }
    Ok(out)
}

/// Trains from scratch. Each epoch shuffles the training split with the
/// stream `(seed, [model, 1, epoch])` and draws dropout masks from
/// `(seed, [model, 2, epoch])`; validation AUC is computed on the logit.
/// Training stops once `patience` consecutive epochs fail to improve it.
pub fn train(train: &SplitData, val: &SplitData, model_cfg: ModelConfig, cfg: TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptySplit("train".into()));
    }
    if val.is_empty() {
        return Err(ModelError::EmptySplit("validation".into()));
    }
    let mut model = Model::new(model_cfg, cfg.seed)?;
    model.fit_input_norm(&train.windows)?;
    let tr_tokens: Vec<Mat> = train.windows.iter().map(|w| model.tokens(w)).collect::<Result<_>>()?;
    let va_tokens: Vec<Mat> = val.windows.iter().map(|w| model.tokens(w)).collect::<Result<_>>()?;
    let n_pos = train.labels.iter().filter(|l| **l).count();
    let n_neg = train.len() - n_pos;
    let pos_weight = match cfg.pos_weight {
        Some(w) => w,
        None if n_pos > 0 && n_neg > 0 => n_neg as f64 / n_pos as f64,
        None => 1.0,
    };
    let tr_labels: Vec<f64> = train.labels.iter().map(|&l| l as u8 as f64).collect();
    let va_labels: Vec<f64> = val.labels.iter().map(|&l| l as u8 as f64).collect();

    let mut adam = AdamState::new(&model.params);
    let mut best_params = model.params.clone();
    let mut best_auc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut wait = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;
    let n_params = model.params.len();

    for epoch in 0..cfg.max_epochs {
        let lr = cosine_lr(cfg.lr, cfg.eta_min, cfg.t_max, epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[rng::DOMAIN_MODEL, 1, epoch as u64]));
        let mut drop_rng = rng::stream(cfg.seed, &[rng::DOMAIN_MODEL, 2, epoch as u64]);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let g = model.build(&mut tape, stack(&tr_tokens, batch), Mode::Train, Some(&mut drop_rng))?;
            let targets: Vec<f64> = batch.iter().map(|&i| train.targets[i]).collect();
            let labels: Vec<f64> = batch.iter().map(|&i| tr_labels[i]).collect();
            let loss = tape.loss(g.logits, &targets, &labels, pos_weight, cfg.loss_mix)?;
            let value = tape.value(loss).data[0];
            if !value.is_finite() {
                return Err(ModelError::NonFinite(format!("training loss at epoch {epoch}")));
            }
            loss_sum += value * batch.len() as f64;
            let grads = tape.backward(loss, n_params)?;
            adamw_step(&mut model.params, &grads, &mut adam, lr, cfg.weight_decay);
        }

        let preds = predict_tokens(&model, &va_tokens, cfg.batch_size)?;
        let logits: Vec<f64> = preds.iter().map(|p| p.logit).collect();
        let val_auc = roc_auc(&logits, &val.labels)?;
        let val_loss = crate::tape::batch_loss(&logits, &val.targets, &va_labels, pos_weight, cfg.loss_mix)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_auc,
            lr,
        });
        if val_auc > best_auc {
            best_auc = val_auc;
            best_epoch = epoch;
            best_params.clone_from(&model.params);
            wait = 0;
        } else {
            wait += 1;
            if wait > cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let last_epoch = history.last().map_or(0, |r| r.epoch);
    model.params = best_params;
    let checkpoint = Checkpoint {
        model_cfg,
        train_cfg: cfg,
        names: model.names.clone(),
        params: model.params.clone(),
        input_mean: model.input_mean.clone(),
        input_sd: model.input_sd.clone(),
        adam,
        epoch: last_epoch,
        best_epoch,
        best_val_auc: best_auc,
        rng: RngState {
            seed: cfg.seed,
            next_epoch: last_epoch + 1,
        },
    };
    Ok(TrainOutcome {
        model,
        checkpoint,
        history,
        stopped_early,
    })
}
