use std::fmt::Write as _;

use anyhow::Result;
use clap::{Args, Subcommand};
use serde::Serialize;

use super::{num, Artifact, Ctx};
use crate::results::ResultsDocument;
use crate::svg::{line_chart, Series};
use nvi_core::synth::{fit_recovery, mc_perturbation, recovery_curve, McSummary, DEFAULT_MC_RUNS};

use super::synth::TrajectoryParams;

pub const DEFAULT_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Subcommand)]
pub enum McCmd {
    /// Minimum post-onset NVI versus perturbation intensity.
    Perturbation(PerturbationArgs),
    /// Exponential recovery curve and its least-squares fit.
    Recovery(RecoveryArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbationArgs {
    /// Comma-separated intensity grid.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID)]
    pub intensities: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MC_RUNS)]
    pub runs: usize,
    #[command(flatten)]
    pub traj: TrajectoryParams,
}

#[derive(Debug, Args, Serialize)]
pub struct RecoveryArgs {
    #[arg(long, default_value_t = 40.0)]
    pub floor: f64,
    #[arg(long, default_value_t = 82.0)]
    pub base: f64,
    #[arg(long, default_value_t = 60.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 300.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 10.0)]
    pub fs: f64,
}

pub fn run(ctx: &Ctx, cmd: McCmd) -> Result<()> {
    match cmd {
        McCmd::Perturbation(a) => perturbation(ctx, a),
        McCmd::Recovery(a) => recovery(ctx, a),
    }
}

pub fn perturbation_csv(rows: &[McSummary]) -> String {
    let mut s = String::from("intensity,mean_nvi,sd_nvi,mean_decline,runs\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(r.intensity),
            num(r.mean_min_nvi),
            num(r.sd_min_nvi),
            num(r.mean_decline),
            r.runs
        );
    }
    s
}

fn perturbation(ctx: &Ctx, a: PerturbationArgs) -> Result<()> {
    // the flattened intensity is unused here; the grid sets it per point
    let cfg = a.traj.config(ctx.seed);
    let rows = mc_perturbation(&a.intensities, a.runs, &cfg, ctx.seed)?;
    let csv = perturbation_csv(&rows);
    let mean: Vec<(f64, f64)> = rows.iter().map(|r| (r.intensity, r.mean_min_nvi)).collect();
    let lo: Vec<(f64, f64)> = rows.iter().map(|r| (r.intensity, r.mean_min_nvi - r.sd_min_nvi)).collect();
    let hi: Vec<(f64, f64)> = rows.iter().map(|r| (r.intensity, r.mean_min_nvi + r.sd_min_nvi)).collect();
    let svg = line_chart(
        "Minimum NVI after perturbation",
        "perturbation intensity",
        "NVI",
        &[
            Series { name: "mean", points: mean },
            Series { name: "mean - SD", points: lo },
            Series { name: "mean + SD", points: hi },
        ],
    );
    let doc = ResultsDocument::new("mc perturbation", &a, &rows, ctx.seed)?;
    ctx.emit(
        &doc,
        Some(&csv),
        &[Artifact::new("perturbation.csv", csv.clone()), Artifact::new("perturbation.svg", svg)],
    )
}

fn recovery(ctx: &Ctx, a: RecoveryArgs) -> Result<()> {
    let curve = recovery_curve(a.floor, a.base, a.tau, a.duration, a.fs)?;
    let fit = fit_recovery(&curve)?;
    let mut csv = String::from("t_s,nvi\n");
    let pts: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as f64 / curve.fs, v))
        .collect();
    for (t, v) in &pts {
        let _ = writeln!(csv, "{},{}", num(*t), num(*v));
    }
    let svg = line_chart("NVI recovery", "time (s)", "NVI", &[Series { name: "recovery", points: pts }]);
    let doc = ResultsDocument::new("mc recovery", &a, fit, ctx.seed)?;
    ctx.emit(
        &doc,
        Some(&csv),
        &[Artifact::new("recovery.csv", csv.clone()), Artifact::new("recovery.svg", svg)],
    )
}
