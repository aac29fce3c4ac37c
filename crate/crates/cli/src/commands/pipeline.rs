use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use super::{num, opt_num, read_input, Artifact, Ctx};
use crate::results::ResultsDocument;
use nvi_core::hrv::{analyze_pulse, hrv_metrics, HrvMetrics, PulseParams, MIN_VALID_DURATION_S};
use nvi_core::morphology::{extract_record, FeatureVector, MetaCovariates};
use nvi_core::signal::{parse_signal_csv, perfusion_index};

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// Signal CSV: `t_s,<channel>...`.
    pub input: PathBuf,
    /// Sampling rate; inferred from `t_s` when omitted.
    #[arg(long)]
    pub fs: Option<f64>,
    /// Channel to analyse; defaults to the first.
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub age: Option<f64>,
    /// 0 female, 1 male.
    #[arg(long)]
    pub sex: Option<f64>,
    #[arg(long)]
    pub sbp: Option<f64>,
    #[arg(long)]
    pub dbp: Option<f64>,
    #[arg(long)]
    pub hr: Option<f64>,
    #[arg(long)]
    pub bmi: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PipelineMetrics {
    pub channel: String,
    pub fs_hz: f64,
    pub n_samples: usize,
    pub duration_s: f64,
    pub n_peaks: usize,
    pub min_valid_duration_s: f64,
    pub hrv: HrvMetrics,
    pub perfusion_index: Option<f64>,
    pub features: FeatureVector,
}

pub fn analyse(args: &PipelineArgs, text: &str) -> Result<PipelineMetrics> {
    let table = parse_signal_csv(text)?;
    let ppg = table.series(args.channel.as_deref(), args.fs)?;
    let params = PulseParams::default();
    let pulse = analyze_pulse(&ppg, &params)?;
    let hrv = hrv_metrics(&pulse.ibi)?;
    let pi = perfusion_index(&ppg, &pulse.peaks).ok();
    let meta = MetaCovariates {
        age: args.age,
        sex: args.sex,
        sbp: args.sbp,
        dbp: args.dbp,
        hr: args.hr,
        bmi: args.bmi,
    };
    let features = extract_record(&ppg, &params, &meta)?;
    Ok(PipelineMetrics {
        channel: ppg.label.clone(),
        fs_hz: ppg.fs,
        n_samples: ppg.len(),
        duration_s: ppg.duration_s(),
        n_peaks: pulse.peaks.len(),
        min_valid_duration_s: MIN_VALID_DURATION_S,
        hrv,
        perfusion_index: pi,
        features,
    })
}

fn table(m: &PipelineMetrics) -> String {
    let mut s = String::from("name,value\n");
    let h = &m.hrv;
    for (k, v) in [
        ("rmssd_ms", Some(h.rmssd_ms)),
        ("sdnn_ms", Some(h.sdnn_ms)),
        ("lf_power_ms2", h.lf_power_ms2),
        ("hf_power_ms2", h.hf_power_ms2),
        ("lf_hf", h.lf_hf),
        ("hrv_valid", Some(h.valid as u8 as f64)),
        ("perfusion_index", m.perfusion_index),
    ] {
        s.push_str(&format!("{k},{}\n", opt_num(v)));
    }
    for (k, v) in m.features.entries() {
        s.push_str(&format!("{k},{}\n", v.map(num).unwrap_or_default()));
    }
    s
}

pub fn run(ctx: &Ctx, args: PipelineArgs) -> Result<()> {
    let text = read_input(&args.input)?;
    let m = analyse(&args, &text)?;
    let t = table(&m);
    let doc = ResultsDocument::new("pipeline", &args, &m, ctx.seed)?;
    ctx.emit(&doc, Some(&t), &[Artifact::new("features.csv", t.clone())])
}
