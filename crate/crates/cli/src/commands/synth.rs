use std::fmt::Write as _;

use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use super::{num, Artifact, Ctx};
use crate::results::ResultsDocument;
use crate::svg::{line_chart, Series};
use nvi_core::synth::{
    gen_cardiac_recording, gen_trajectory, write_dataset, CardiacParams, Class, DatasetPlan, NoiseSd,
    TrajectoryConfig, CHANNEL_NAMES,
};

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Labelled window dataset written as binary windows plus a manifest.
    Dataset(DatasetArgs),
    /// One 4-channel trajectory as CSV.
    Trajectory(TrajectoryArgs),
    /// Co-generated ECG and PPG with ground-truth intervals.
    Ppg(PpgArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrajectoryParams {
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 100.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 30.0)]
    pub onset: f64,
    /// Maximum perturbation intensity in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub intensity: f64,
    /// Multiplier on the default noise levels.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
}

impl TrajectoryParams {
    pub fn config(&self, seed: u64) -> TrajectoryConfig {
        TrajectoryConfig {
            duration_s: self.duration,
            fs: self.fs,
            perturb_onset_s: self.onset,
            intensity: self.intensity,
            noise_sd: NoiseSd::default().scaled(self.noise_scale),
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Fraction of NVI windows.
    #[arg(long, default_value_t = 0.5)]
    pub balance: f64,
    #[command(flatten)]
    pub traj: TrajectoryParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassArg {
    Stable,
    Nvi,
}

#[derive(Debug, Args, Serialize)]
pub struct TrajectoryArgs {
    #[arg(long, value_enum, default_value_t = ClassArg::Nvi)]
    pub class: ClassArg,
    #[command(flatten)]
    pub traj: TrajectoryParams,
}

#[derive(Debug, Args, Serialize)]
pub struct PpgArgs {
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 125.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 70.0)]
    pub hr_bpm: f64,
    /// Target RMSSD of the beat-to-beat intervals.
    #[arg(long, default_value_t = 40.0)]
    pub rmssd_ms: f64,
}

pub fn run(ctx: &Ctx, cmd: SynthCmd) -> Result<()> {
    match cmd {
        SynthCmd::Dataset(a) => dataset(ctx, a),
        SynthCmd::Trajectory(a) => trajectory(ctx, a),
        SynthCmd::Ppg(a) => ppg(ctx, a),
    }
}

#[derive(Serialize)]
struct DatasetMetrics {
    n: usize,
    n_nvi: usize,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    mean_target_stable: f64,
    mean_target_nvi: f64,
}

fn dataset(ctx: &Ctx, a: DatasetArgs) -> Result<()> {
    let dir = ctx.out_dir("synth dataset")?;
    let cfg = a.traj.config(ctx.seed);
    let plan = DatasetPlan::new(a.n, a.balance, &cfg, ctx.seed)?;
    let manifest = write_dataset(dir, &plan)?;
    let mean_of = |nvi: bool| {
        let v: Vec<f64> = manifest
            .labels
            .iter()
            .zip(&manifest.nvi_targets)
            .filter(|(c, _)| c.is_nvi() == nvi)
            .map(|(_, t)| *t)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let m = DatasetMetrics {
        n: manifest.n,
        n_nvi: manifest.labels.iter().filter(|c| c.is_nvi()).count(),
        n_train: manifest.split_indices.train.len(),
        n_val: manifest.split_indices.val.len(),
        n_test: manifest.split_indices.test.len(),
        mean_target_stable: mean_of(false),
        mean_target_nvi: mean_of(true),
    };
    let doc = ResultsDocument::new("synth dataset", &a, &m, ctx.seed)?;
    ctx.emit(&doc, None, &[])
}

#[derive(Serialize)]
struct TrajectoryMetrics {
    class: Class,
    n_samples: usize,
    onset_index: usize,
    post_onset_score: f64,
    min_block_score: f64,
}

fn trajectory(ctx: &Ctx, a: TrajectoryArgs) -> Result<()> {
    let cfg = a.traj.config(ctx.seed);
    let class = match a.class {
        ClassArg::Stable => Class::Stable,
        ClassArg::Nvi => Class::Nvi,
    };
    let traj = gen_trajectory(&cfg, class)?;
    let blocks = traj.block_scores(1.0)?;
    let mut csv = format!("t_s,{}\n", CHANNEL_NAMES.join(","));
    for i in 0..traj.len() {
        let _ = write!(csv, "{}", num(i as f64 / traj.fs));
        for c in &traj.channels {
            let _ = write!(csv, ",{}", num(c[i]));
        }
        csv.push('\n');
    }
    let m = TrajectoryMetrics {
        class,
        n_samples: traj.len(),
        onset_index: traj.onset_index,
        post_onset_score: traj.post_onset_score()?,
        min_block_score: blocks.iter().map(|b| b.1).fold(f64::INFINITY, f64::min),
    };
    let svg = line_chart(
        "Composite NVI per 1 s block",
        "time (s)",
        "NVI",
        &[Series { name: class.as_str(), points: blocks }],
    );
    let doc = ResultsDocument::new("synth trajectory", &a, &m, ctx.seed)?;
    ctx.emit(
        &doc,
        Some(&csv),
        &[Artifact::new("trajectory.csv", csv.clone()), Artifact::new("nvi_blocks.svg", svg)],
    )
}

/// Ground truth stored alongside a generated PPG recording.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct PpgTruth {
    pub fs: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub true_rmssd_ms: f64,
    pub true_sdnn_ms: f64,
    pub ibi_ms: Vec<f64>,
    pub r_peak_times_s: Vec<f64>,
}

fn ppg(ctx: &Ctx, a: PpgArgs) -> Result<()> {
    let params = CardiacParams {
        hr_bpm: a.hr_bpm,
        rmssd_ms: a.rmssd_ms,
        ..CardiacParams::default()
    };
    let rec = gen_cardiac_recording(&params, a.duration, a.fs, ctx.seed)?;
    let mut csv = String::from("t_s,ppg,ecg\n");
    for i in 0..rec.ppg.len() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            num(i as f64 / a.fs),
            num(rec.ppg.samples[i]),
            num(rec.ecg.samples[i])
        );
    }
    let truth = PpgTruth {
        fs: a.fs,
        duration_s: a.duration,
        seed: ctx.seed,
        true_rmssd_ms: rec.true_rmssd_ms,
        true_sdnn_ms: rec.true_sdnn_ms,
        ibi_ms: rec.ibi_ms.clone(),
        r_peak_times_s: rec.r_peak_times.clone(),
    };
    let truth_json = serde_json::to_string_pretty(&truth)? + "\n";
    let doc = ResultsDocument::new("synth ppg", &a, &truth, ctx.seed)?;
    ctx.emit(
        &doc,
        Some(&csv),
        &[Artifact::new("recording.csv", csv.clone()), Artifact::new("truth.json", truth_json)],
    )
}
