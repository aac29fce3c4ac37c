use anyhow::Result;
use clap::Args;
use serde::Serialize;

use super::Ctx;
use crate::bench::{bench_score, BenchReport, MIN_ITERS};
use crate::results::ResultsDocument;
use crate::{InternalError, UsageError};

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Scoring calls per run (at least 1000).
    #[arg(long, default_value_t = 1_000_000)]
    pub iters: usize,
    /// Untimed calls before measurement.
    #[arg(long, default_value_t = 10_000)]
    pub warmup: usize,
}

fn csv(r: &BenchReport) -> String {
    format!(
        "iters,runs,p50_ns,p99_ns,max_ns,mean_ns,hot_path_allocations,deterministic\n{},{},{},{},{},{},{},{}\n",
        r.iters, r.runs, r.p50_ns, r.p99_ns, r.max_ns, r.mean_ns, r.hot_path_allocations, r.deterministic
    )
}

/// Fails when outputs diverge or the hot path allocates.
pub fn check(r: &BenchReport) -> Result<()> {
    if let Some(case) = r.failed_case {
        return Err(InternalError(format!("scoring failed on bench case {case}")).into());
    }
    if let Some(d) = r.first_divergence {
        return Err(InternalError(format!(
            "nondeterministic output: run {}, call {}, case {}",
            d.run, d.call, d.case
        ))
        .into());
    }
    if !r.deterministic {
        return Err(InternalError(format!("run digests differ: {:?}", r.run_digests)).into());
    }
    if r.hot_path_allocations != 0 {
        return Err(InternalError(format!(
            "hot path allocated {} times after warmup",
            r.hot_path_allocations
        ))
        .into());
    }
    Ok(())
}

pub fn run(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    if a.iters < MIN_ITERS {
        return Err(UsageError(format!("--iters must be at least {MIN_ITERS}")).into());
    }
    let report = bench_score(a.iters, a.warmup, ctx.seed)?;
    if !report.alloc_tracking {
        eprintln!("warning: allocation counter not installed; allocation check is vacuous");
    }
    let table = csv(&report);
    let doc = ResultsDocument::new("bench", &a, &report, ctx.seed)?;
    ctx.emit(&doc, Some(&table), &[])?;
    check(&report)
}
