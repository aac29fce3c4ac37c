//! Latency and determinism benchmark of composite scoring.
//!
//! A fixed set of inputs is scored `iters` times in each of three runs. Every
//! output is compared bit for bit with the first result for the same input,
//! the allocator counter is read around the measured loops, and per-call wall
//! latency is recorded into a buffer sized up front.

use std::hint::black_box;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::alloc;
use nvi_core::nvi::{composite, ModalityInputs, NviResult, MODALITIES};
use nvi_core::rng;

pub const MIN_ITERS: usize = 1000;
pub const RUNS: usize = 3;
pub const N_CASES: usize = 256;
const OUT_WORDS: usize = 2 + 2 * MODALITIES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    pub run: usize,
    pub call: usize,
    pub case: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub iters: usize,
    pub warmup: usize,
    pub runs: usize,
    pub cases: usize,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
    pub mean_ns: f64,
    /// The counting allocator is installed, so `hot_path_allocations` is meaningful.
    pub alloc_tracking: bool,
    pub hot_path_allocations: u64,
    /// FNV-1a digest of every output, one per run.
    pub run_digests: Vec<String>,
    pub deterministic: bool,
    pub first_divergence: Option<Divergence>,
    /// Scoring returned an error for this case (none expected).
    pub failed_case: Option<usize>,
}

/// Deterministic inputs covering the full and degraded paths.
pub fn bench_inputs(seed: u64) -> Vec<ModalityInputs> {
    let mut r = rng::stream(seed, &[rng::DOMAIN_MONTE_CARLO, u64::MAX]);
    (0..N_CASES)
        .map(|i| {
            let mut x = ModalityInputs::all(
                r.random_range(80.0..100.0),
                r.random_range(0.0..120.0),
                r.random_range(0.0..0.4),
                r.random_range(-180.0..180.0),
                r.random_range(-180.0..180.0),
            );
            // every fourth case drops one modality
            match i % 16 {
                3 => x.spo2_pct = None,
                7 => x.rmssd_ms = None,
                11 => x.pi = None,
                15 => (x.phase_left_deg, x.phase_right_deg) = (None, None),
                _ => {}
            }
            x
        })
        .collect()
}

fn encode(r: &NviResult) -> [u64; OUT_WORDS] {
    let mut out = [0u64; OUT_WORDS];
    out[0] = r.score.to_bits();
    out[1] = r.tier as u64;
    for k in 0..MODALITIES {
        out[2 + k] = r.modality_scores[k].map_or(u64::MAX, f64::to_bits);
        out[2 + MODALITIES + k] = r.effective_weights[k].to_bits();
    }
    out
}

fn fnv(mut h: u64, words: &[u64; OUT_WORDS]) -> u64 {
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

pub fn bench_score(iters: usize, warmup: usize, seed: u64) -> nvi_core::Result<BenchReport> {
    if iters < MIN_ITERS {
        return Err(nvi_core::Error::InvalidParameter(format!(
            "bench needs at least {MIN_ITERS} iterations, got {iters}"
        )));
    }
    let inputs = bench_inputs(seed);
    let mut reference = vec![[0u64; OUT_WORDS]; N_CASES];
    for (case, x) in inputs.iter().enumerate() {
        reference[case] = encode(&composite(x)?);
    }
    let mut latencies = vec![0u64; RUNS * iters];
    let mut digests = [FNV_OFFSET; RUNS];
    let mut divergence: Option<Divergence> = None;
    let mut failed_case: Option<usize> = None;
    let tracking = alloc::is_active();

    for i in 0..warmup {
        let _ = black_box(composite(black_box(&inputs[i % N_CASES])));
    }

    let before = alloc::thread_allocations();
    'runs: for run in 0..RUNS {
        let lat = &mut latencies[run * iters..(run + 1) * iters];
        let mut h = FNV_OFFSET;
        for (call, slot) in lat.iter_mut().enumerate() {
            let case = call % N_CASES;
            let t0 = Instant::now();
            let res = black_box(composite(black_box(&inputs[case])));
            let dt = t0.elapsed();
            *slot = dt.as_nanos() as u64;
            let words = match res {
                Ok(r) => encode(&r),
                Err(_) => {
                    failed_case = Some(case);
                    break 'runs;
                }
            };
            h = fnv(h, &words);
            if divergence.is_none() && words != reference[case] {
                divergence = Some(Divergence { run, call, case });
            }
        }
        digests[run] = h;
    }
    let hot_path_allocations = alloc::thread_allocations() - before;

    latencies.sort_unstable();
    let at = |q: f64| latencies[((latencies.len() - 1) as f64 * q).round() as usize];
    let mean_ns = latencies.iter().map(|&v| v as f64).sum::<f64>() / latencies.len() as f64;
    let deterministic = divergence.is_none() && failed_case.is_none() && digests.iter().all(|d| *d == digests[0]);
    Ok(BenchReport {
        iters,
        warmup,
        runs: RUNS,
        cases: N_CASES,
        p50_ns: at(0.50),
        p99_ns: at(0.99),
        max_ns: *latencies.last().expect("iters >= MIN_ITERS"),
        mean_ns,
        alloc_tracking: tracking,
        hot_path_allocations,
        run_digests: digests.iter().map(|d| format!("{d:016x}")).collect(),
        deterministic,
        first_divergence: divergence,
        failed_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_runs() {
        assert!(bench_score(999, 0, 1).is_err());
    }

    #[test]
    fn deterministic_small_run() {
        let r = bench_score(2000, 100, 42).unwrap();
        assert!(r.deterministic);
        assert_eq!(r.run_digests.len(), RUNS);
        assert!(r.p50_ns <= r.p99_ns && r.p99_ns <= r.max_ns);
    }

    #[test]
    fn inputs_include_degraded_cases() {
        let x = bench_inputs(42);
        assert!(x.iter().any(|i| i.spo2_pct.is_none()));
        assert!(x.iter().any(|i| i.phase_left_deg.is_none()));
        assert!(x.iter().all(|i| composite(i).is_ok()));
    }
}
