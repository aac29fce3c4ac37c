use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use super::{Artifact, Ctx};
use crate::results::ResultsDocument;
use crate::UsageError;
use nvi_core::stats::{evaluate, roc_auc, stratified_kfold, EvalReport};
use nvi_core::synth::Dataset;
use nvi_model::{window_mean_features, Checkpoint, LogisticModel};

use super::train::load_dataset;

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Dataset directory written by `synth dataset`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Folds over the test split for per-fold AUCs.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// L2 penalty of the logistic baseline.
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

#[derive(Debug, Serialize)]
pub struct ModelRow {
    pub model: String,
    pub report: EvalReport,
}

#[derive(Debug, Serialize)]
pub struct EvalMetrics {
    pub n_test: usize,
    pub rows: Vec<ModelRow>,
    pub table: Vec<String>,
}

fn per_fold(scores: &[f64], labels: &[bool], folds: &[usize], k: usize) -> Vec<f64> {
    (0..k)
        .filter_map(|f| {
            let (s, l): (Vec<f64>, Vec<bool>) = folds
                .iter()
                .enumerate()
                .filter(|(_, &g)| g == f)
                .map(|(i, _)| (scores[i], labels[i]))
                .unzip();
            roc_auc(&s, &l).ok()
        })
        .collect()
}

/// Instability scores on the test split: transformer logit, logistic
/// log-odds on pre/post channel means, and `100 - composite`.
pub fn test_scores(ds: &Dataset, ckpt: &Checkpoint, l2: f64, batch: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let split = &ds.plan.split;
    let model = ckpt.model()?;
    let test: Vec<&[f64]> = split.test.iter().map(|&i| ds.windows[i].channels.as_slice()).collect();
    let transformer: Vec<f64> = model.predict(&test, batch)?.iter().map(|p| p.logit).collect();

    let onset = ds.plan.cfg.onset_index();
    let feats = |i: usize| window_mean_features(&ds.windows[i].channels, ds.windows[i].n_samples, onset);
    let x_train: Vec<Vec<f64>> = split.train.iter().map(|&i| feats(i)).collect();
    let y_train: Vec<bool> = split.train.iter().map(|&i| ds.windows[i].label.is_nvi()).collect();
    let lr = LogisticModel::fit(&x_train, &y_train, l2)?;
    let logistic: Vec<f64> = split.test.iter().map(|&i| lr.decision(&feats(i))).collect();

    let composite: Vec<f64> = split.test.iter().map(|&i| 100.0 - ds.windows[i].nvi_target).collect();
    Ok(vec![
        ("Transformer-lite".to_string(), transformer),
        ("Logistic (channel means)".to_string(), logistic),
        ("Composite NVI".to_string(), composite),
    ])
}

pub fn evaluate_all(ds: &Dataset, ckpt: &Checkpoint, a: &EvalArgs, seed: u64) -> Result<EvalMetrics> {
    let labels: Vec<bool> = ds.plan.split.test.iter().map(|&i| ds.windows[i].label.is_nvi()).collect();
    let folds = stratified_kfold(&labels, a.folds, seed)?;
    let mut rows = Vec::new();
    for (name, scores) in test_scores(ds, ckpt, a.l2, a.batch_size)? {
        let mut report = evaluate(&scores, &labels, a.bootstrap, seed)?;
        report.per_fold_aucs = per_fold(&scores, &labels, &folds, a.folds);
        rows.push(ModelRow { model: name, report });
    }
    let mut table = vec![EvalReport::TABLE_HEADER.to_string()];
    table.extend(rows.iter().map(|r| r.report.table_row(&r.model)));
    Ok(EvalMetrics {
        n_test: labels.len(),
        rows,
        table,
    })
}

fn csv_table(m: &EvalMetrics) -> String {
    let mut s = String::from("model,auc,auc_ci_low,auc_ci_high,sens,spec,ppv,npv,youden_threshold\n");
    for r in &m.rows {
        let e = &r.report;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.model, e.auc, e.auc_ci_low, e.auc_ci_high, e.sens, e.spec, e.ppv, e.npv, e.youden_threshold
        ));
    }
    s
}

pub fn run(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    if !a.checkpoint.exists() {
        return Err(UsageError(format!("checkpoint not found: {}", a.checkpoint.display())).into());
    }
    let ds = load_dataset(&a.data)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let m = evaluate_all(&ds, &ckpt, &a, ctx.seed)?;
    for line in &m.table {
        eprintln!("{line}");
    }
    let csv = csv_table(&m);
    let doc = ResultsDocument::new("eval", &a, &m, ctx.seed)?;
    ctx.emit(
        &doc,
        Some(&csv),
        &[Artifact::new("eval.csv", csv.clone()), Artifact::new("table.txt", m.table.join("\n") + "\n")],
    )
}
