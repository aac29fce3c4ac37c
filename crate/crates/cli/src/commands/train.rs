use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use super::{require_dir, Artifact, Ctx};
use crate::results::ResultsDocument;
use crate::svg::{line_chart, Series};
use crate::UsageError;
use nvi_core::synth::{read_manifest, read_window, Dataset, DatasetPlan, Manifest, TrajectoryConfig};
use nvi_model::{history_jsonl, param_count, train, ModelConfig, SplitData, TrainConfig};

pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory written by `synth dataset`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 25)]
    pub patience: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub weight_decay: f64,
    /// Cosine schedule period in epochs.
    #[arg(long, default_value_t = 100)]
    pub t_max: usize,
    /// Samples averaged into one token.
    #[arg(long, default_value_t = 100)]
    pub patch: usize,
    #[arg(long, default_value_t = 128)]
    pub d_model: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 256)]
    pub ffn_dim: usize,
    #[arg(long, default_value_t = 0.15)]
    pub dropout: f64,
}

/// Reads a stored dataset back into memory.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    require_dir(dir)?;
    if !dir.join("manifest.json").exists() {
        return Err(UsageError(format!("no manifest.json in {}", dir.display())).into());
    }
    let m: Manifest = read_manifest(dir)?;
    let cfg = TrajectoryConfig {
        duration_s: m.duration_s,
        fs: m.fs,
        perturb_onset_s: m.perturb_onset_s,
        intensity: m.max_intensity,
        noise_sd: m.noise_sd,
        seed: m.seed,
    };
    let windows = m
        .files
        .iter()
        .map(|f| read_window(&dir.join(f)).with_context(|| format!("reading {f}")))
        .collect::<Result<Vec<_>>>()?;
    let plan = DatasetPlan {
        cfg,
        seed: m.seed,
        class_balance: m.class_balance,
        labels: m.labels,
        split: m.split_indices,
    };
    Ok(Dataset { plan, windows })
}

impl TrainArgs {
    pub fn model_config(&self, window_len: usize) -> Result<ModelConfig> {
        if self.patch == 0 || !window_len.is_multiple_of(self.patch) {
            return Err(UsageError(format!(
                "patch {} must divide the window length {window_len}",
                self.patch
            ))
            .into());
        }
        Ok(ModelConfig {
            in_channels: nvi_core::synth::N_CHANNELS,
            d_model: self.d_model,
            heads: self.heads,
            layers: self.layers,
            ffn_dim: self.ffn_dim,
            dropout: self.dropout,
            seq_len: window_len / self.patch,
            patch: self.patch,
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            t_max: self.t_max,
            patience: self.patience,
            batch_size: self.batch_size,
            seed,
            max_epochs: self.epochs,
            ..TrainConfig::default()
        }
    }
}

#[derive(Serialize)]
struct TrainMetrics {
    epochs_run: usize,
    best_epoch: usize,
    best_val_auc: f64,
    stopped_early: bool,
    param_count: usize,
    n_train: usize,
    n_val: usize,
    model: ModelConfig,
}

pub fn run(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let out = ctx.out_dir("train")?.to_path_buf();
    let ds = load_dataset(&a.data)?;
    let window_len = ds.windows.first().map_or(0, |w| w.n_samples);
    let model_cfg = a.model_config(window_len)?;
    let train_split = SplitData::from_indices(&ds, &ds.plan.split.train);
    let val_split = SplitData::from_indices(&ds, &ds.plan.split.val);
    let outcome = train(&train_split, &val_split, model_cfg, a.train_config(ctx.seed))?;
    let ckpt = &outcome.checkpoint;
    let m = TrainMetrics {
        epochs_run: outcome.history.len(),
        best_epoch: ckpt.best_epoch,
        best_val_auc: ckpt.best_val_auc,
        stopped_early: outcome.stopped_early,
        param_count: param_count(&model_cfg),
        n_train: train_split.len(),
        n_val: val_split.len(),
        model: model_cfg,
    };
    let pts = |f: fn(&nvi_model::EpochRecord) -> f64| -> Vec<(f64, f64)> {
        outcome.history.iter().map(|r| (r.epoch as f64, f(r))).collect()
    };
    let svg = line_chart(
        "Training history",
        "epoch",
        "value",
        &[
            Series { name: "train loss", points: pts(|r| r.train_loss) },
            Series { name: "val loss", points: pts(|r| r.val_loss) },
            Series { name: "val AUC", points: pts(|r| r.val_auc) },
        ],
    );
    let doc = ResultsDocument::new("train", &a, &m, ctx.seed)?;
    std::fs::create_dir_all(&out)?;
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    ctx.emit(
        &doc,
        None,
        &[
            Artifact::new("history.jsonl", history_jsonl(&outcome.history)),
            Artifact::new("training.svg", svg),
        ],
    )
}
