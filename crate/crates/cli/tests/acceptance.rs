//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measured values and runtime; the test fails if any criterion does.

use std::time::{Duration, Instant};

use nvi_cli::alloc::CountingAlloc;
use nvi_cli::bench::bench_score;
use nvi_core::biosense::{ConductivityModel, CurveShape};
use nvi_core::hrv::{prv_from_ppg, PulseParams};
use nvi_core::morphology::{
    extract_record, freq_features, permutation_entropy, sample_entropy, FeatureVector, MetaCovariates,
};
use nvi_core::nvi::{
    composite, composite_from_scores, score_hrv, score_perf, score_phase, score_spo2, tier, ModalityInputs, Tier,
};
use nvi_core::rng;
use nvi_core::signal::TimeSeries;
use nvi_core::stats::{
    bland_altman, mann_whitney, mann_whitney_p, pearson, roc_auc, stratified_kfold, PMethod,
};
use nvi_core::synth::{
    fit_recovery, gen_cardiac_recording, gen_dataset, mc_perturbation, recovery_curve, CardiacParams, DatasetPlan,
    NoiseSd, TrajectoryConfig, DEFAULT_MC_RUNS,
};
use nvi_model::gradcheck::{gradient_check, tiny_config};
use nvi_model::{param_count, train, ModelConfig, SplitData, TrainConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;
use rand_distr::StandardNormal;

#[global_allocator]
static GLOBAL: CountingAlloc = CountingAlloc;

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Collects named sub-checks; the criterion passes when all of them do.
#[derive(Default)]
struct Checks {
    items: Vec<(String, bool)>,
}

impl Checks {
    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.items.push((what.into(), ok));
    }

    fn outcome(self) -> Outcome {
        let pass = self.items.iter().all(|i| i.1);
        let detail = self
            .items
            .iter()
            .map(|(w, ok)| if *ok { w.clone() } else { format!("{w} [failed]") })
            .collect::<Vec<_>>()
            .join("; ");
        Outcome { pass, detail }
    }
}

fn c1_formulas() -> Outcome {
    let mut c = Checks::default();
    let tol = 1e-9;
    let mut err = 0.0f64;
    let mut at = |got: f64, want: f64| err = err.max((got - want).abs());
    at(score_spo2(100.0).unwrap(), 1.0);
    at(score_spo2(85.0).unwrap(), 0.0);
    at(score_spo2(92.5).unwrap(), 0.5);
    at(score_hrv(40.0).unwrap(), 0.5);
    at(score_hrv(65.0).unwrap(), 1.0 / (1.0 + (-1.0f64).exp()));
    at(score_hrv(15.0).unwrap(), 1.0 / (1.0 + 1.0f64.exp()));
    at(score_perf(0.20).unwrap(), 1.0);
    at(score_perf(0.10).unwrap(), 0.5);
    at(score_perf(0.50).unwrap(), 1.0);
    at(score_phase(37.0, 37.0).unwrap(), 1.0);
    at(score_phase(90.0, 0.0).unwrap(), 0.5);
    at(score_phase(350.0, 10.0).unwrap(), 8.0 / 9.0);

    let r = composite_from_scores([Some(1.0), Some(0.5), Some(0.5), Some(1.0)]).unwrap();
    at(r.score, 77.5);
    let alert1 = r.tier == Tier::Alert1;
    let r2 = composite(&ModalityInputs::all(100.0, 40.0, 0.10, 0.0, 0.0)).unwrap();
    at(r2.score, 77.5);
    let d = composite_from_scores([Some(1.0), Some(1.0), Some(1.0), None]).unwrap();
    at(d.score, 100.0);
    for (w, want) in d.effective_weights.iter().zip([0.4, 1.0 / 3.0, 0.2 / 0.75, 0.0]) {
        at(*w, want);
    }
    let z = composite_from_scores([Some(0.0); 4]).unwrap();
    at(z.score, 0.0);
    c.check(format!("max abs error {err:.1e}"), err < tol);
    c.check("77.5 -> Alert1", alert1 && r2.tier == Tier::Alert1);
    c.check("degraded 100 -> Normal", d.tier == Tier::Normal);
    c.check("0 -> Alert2", z.tier == Tier::Alert2);
    c.check(
        "tiers 80/60/59.999",
        tier(80.0).unwrap() == Tier::Normal
            && tier(60.0).unwrap() == Tier::Alert1
            && tier(59.999).unwrap() == Tier::Alert2,
    );
    c.outcome()
}

fn c2_degraded_mode() -> Outcome {
    let mut c = Checks::default();
    // every subset once, then random inputs over random subsets
    let mut worst = 0.0f64;
    for mask in 1u8..16 {
        let s = [0.9, 0.2, 0.6, 0.4].map(Some);
        let scores: [Option<f64>; 4] = std::array::from_fn(|k| if mask >> k & 1 == 1 { s[k] } else { None });
        let r = composite_from_scores(scores).unwrap();
        worst = worst.max((r.effective_weights.iter().sum::<f64>() - 1.0).abs());
    }
    c.check(format!("15 subsets, max |sum w - 1| {worst:.1e}"), worst <= 1e-12);

    let cases = 10_000;
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let strategy = (
        1u8..16,
        0.0f64..=100.0,
        0.0f64..300.0,
        0.0f64..1.0,
        -720.0f64..720.0,
        -720.0f64..720.0,
    );
    let result = runner.run(&strategy, |(mask, spo2, rmssd, pi, l, r)| {
        let on = |k: u8| mask >> k & 1 == 1;
        let x = ModalityInputs {
            spo2_pct: on(0).then_some(spo2),
            rmssd_ms: on(1).then_some(rmssd),
            pi: on(2).then_some(pi),
            phase_left_deg: on(3).then_some(l),
            phase_right_deg: on(3).then_some(r),
        };
        let res = composite(&x).unwrap();
        let sum: f64 = res.effective_weights.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "weights sum {sum}");
        prop_assert!((0.0..=100.0).contains(&res.score), "score {}", res.score);
        for k in 0..4 {
            prop_assert_eq!(res.effective_weights[k] == 0.0, !on(k as u8));
        }
        Ok(())
    });
    c.check(
        format!("{cases} random cases: {}", result.as_ref().map_or_else(|e| e.to_string(), |_| "ok".into())),
        result.is_ok(),
    );
    c.outcome()
}

fn composite_test_auc(noise_scale: f64, seed: u64) -> f64 {
    let cfg = TrajectoryConfig {
        noise_sd: NoiseSd::default().scaled(noise_scale),
        ..TrajectoryConfig::default()
    };
    let plan = DatasetPlan::new(2000, 0.5, &cfg, seed).unwrap();
    let targets = plan.targets().unwrap();
    let flags = plan.label_flags();
    let test = &plan.split.test;
    let scores: Vec<f64> = test.iter().map(|&i| 100.0 - targets[i]).collect();
    let labels: Vec<bool> = test.iter().map(|&i| flags[i]).collect();
    roc_auc(&scores, &labels).unwrap()
}

fn c3_benchmark_band() -> Outcome {
    let mut c = Checks::default();
    let auc = composite_test_auc(1.0, SEED);
    c.check(format!("test AUC {auc:.4} in [0.83, 0.93]"), (0.83..=0.93).contains(&auc));
    let mean_auc = |scale: f64| (0..5).map(|s| composite_test_auc(scale, SEED + s)).sum::<f64>() / 5.0;
    let (lo, mid, hi) = (mean_auc(0.5), mean_auc(1.0), mean_auc(2.0));
    c.check(
        format!("mean AUC over 5 seeds: noise x0.5 {lo:.4} >= x1 {mid:.4} >= x2 {hi:.4}"),
        lo >= mid && mid >= hi,
    );
    c.outcome()
}

fn c4_transformer() -> Outcome {
    let mut c = Checks::default();
    let full = ModelConfig { seq_len: 6000, patch: 1, ..ModelConfig::default() };
    let n_params = param_count(&full);
    c.check(
        format!("param_count(T=6000) {n_params} in [1.0M, 1.4M]"),
        (1_000_000..=1_400_000).contains(&n_params),
    );
    let g = gradient_check(tiny_config(), 5).unwrap();
    c.check(
        format!("gradcheck {} scalars, max rel error {:.2e}", g.checked, g.worst_rel_error),
        g.worst_rel_error < 1e-4,
    );

    let ds = gen_dataset(500, 0.5, &TrajectoryConfig::default(), SEED).unwrap();
    let tr = SplitData::from_indices(&ds, &ds.plan.split.train);
    let va = SplitData::from_indices(&ds, &ds.plan.split.val);
    let model_cfg = ModelConfig { seq_len: 60, patch: 100, ..ModelConfig::default() };
    let cfg = TrainConfig { max_epochs: 30, seed: SEED, ..TrainConfig::default() };
    let out = train(&tr, &va, model_cfg, cfg).unwrap();
    let auc = out.checkpoint.best_val_auc;
    c.check(
        format!("val AUC {auc:.4} >= 0.85 after {} epochs (best {})", out.history.len(), out.checkpoint.best_epoch),
        auc >= 0.85 && out.history.len() <= 30,
    );
    c.outcome()
}

fn c5_dynamics() -> Outcome {
    let mut c = Checks::default();
    let curve = recovery_curve(40.0, 82.0, 60.0, 300.0, 10.0).unwrap();
    let fit = fit_recovery(&curve).unwrap();
    c.check(format!("fitted tau {:.4} s within 10% of 60", fit.tau_s), (fit.tau_s - 60.0).abs() <= 6.0);

    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let rows = mc_perturbation(&grid, DEFAULT_MC_RUNS, &TrajectoryConfig::default(), SEED).unwrap();
    let mut mono = true;
    for w in rows.windows(2) {
        mono &= w[1].mean_min_nvi <= w[0].mean_min_nvi + w[0].sd_min_nvi;
    }
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    c.check(
        format!(
            "{} runs x {} intensities monotone within 1 SD ({:.2}±{:.2} -> {:.2}±{:.2})",
            DEFAULT_MC_RUNS,
            rows.len(),
            first.mean_min_nvi,
            first.sd_min_nvi,
            last.mean_min_nvi,
            last.sd_min_nvi
        ),
        mono,
    );
    c.outcome()
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                twice += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    (twice as f64 / 2.0) / pairs as f64
}

fn c6_statistics() -> Outcome {
    let mut c = Checks::default();
    let mw = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    c.check(
        format!("[1,2,3] vs [4,5,6]: U={} p={:.6} ({:?})", mw.u_statistic, mw.p_value, mw.method),
        mw.u_statistic == 0.0 && (mw.p_value - 0.1).abs() < 1e-12 && mw.method == PMethod::Exact,
    );

    let mut r = rng::stream(SEED, &[rng::DOMAIN_BOOTSTRAP, 6]);
    let (mut bad, mut worst) = (0, 0.0f64);
    for _ in 0..100 {
        let n1 = r.random_range(2..=6);
        let n2 = r.random_range(2..=6);
        let a: Vec<f64> = (0..n1).map(|_| r.random_range(0..100) as f64).collect();
        let b: Vec<f64> = (0..n2).map(|_| r.random_range(0..100) as f64).collect();
        let pe = mann_whitney_p(&a, &b, PMethod::Exact).unwrap();
        let pn = mann_whitney_p(&a, &b, PMethod::NormalApprox).unwrap();
        let gap = (pe - pn).abs();
        worst = worst.max(gap);
        bad += (gap >= 0.05) as usize;
    }
    c.check(
        format!("exact vs normal p within 0.05: {bad}/100 trials exceed, max gap {worst:.4}"),
        bad == 0,
    );

    let mut mismatches = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=30);
        let mut labels: Vec<bool> = (0..n).map(|_| r.random()).collect();
        labels[0] = true;
        labels[1] = false;
        // coarse grid so ties occur
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..8) as f64 * 0.25).collect();
        if roc_auc(&scores, &labels).unwrap() != brute_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    c.check(format!("rank AUC == brute force on 100 instances ({mismatches} mismatches)"), mismatches == 0);

    let ba = bland_altman(&[10.0, 20.0, 30.0], &[12.0, 19.0, 33.0]).unwrap();
    let sd = (13.0f64 / 3.0).sqrt();
    let bias = -4.0 / 3.0;
    let ba_err = [
        (ba.bias - bias).abs(),
        (ba.sd_diff - sd).abs(),
        (ba.loa_low - (bias - 1.96 * sd)).abs(),
        (ba.loa_high - (bias + 1.96 * sd)).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    c.check(
        format!("Bland-Altman bias {:.6} LoA [{:.4}, {:.4}] err {ba_err:.1e}", ba.bias, ba.loa_low, ba.loa_high),
        ba_err < 1e-9,
    );

    let labels: Vec<bool> = (0..172).map(|i| i < 84).collect();
    let folds = stratified_kfold(&labels, 5, SEED).unwrap();
    let mut sizes = [0usize; 5];
    let mut pos = [0usize; 5];
    for (f, l) in folds.iter().zip(&labels) {
        sizes[*f] += 1;
        pos[*f] += *l as usize;
    }
    let mut sorted = sizes;
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    c.check(
        format!("84/88 folds sizes {sizes:?} positives {pos:?}"),
        sorted == [35, 35, 34, 34, 34] && pos.iter().all(|p| (16..=17).contains(p)),
    );
    c.outcome()
}

fn c7_prv_agreement() -> Outcome {
    let mut c = Checks::default();
    let mut r = rng::stream(SEED, &[rng::DOMAIN_WAVEFORM, 7]);
    let (mut est, mut truth) = (Vec::new(), Vec::new());
    for subject in 0..50u64 {
        let p = CardiacParams {
            hr_bpm: r.random_range(55.0..95.0),
            rmssd_ms: r.random_range(15.0..80.0),
            ..CardiacParams::default()
        };
        let rec = gen_cardiac_recording(&p, 120.0, 125.0, SEED.wrapping_add(subject)).unwrap();
        est.push(prv_from_ppg(&rec.ppg).unwrap().rmssd_ms);
        truth.push(rec.true_rmssd_ms);
    }
    let corr = pearson(&est, &truth).unwrap();
    c.check(format!("50 subjects, Pearson r {:.4} >= 0.9", corr.r), corr.r >= 0.9);
    c.outcome()
}

fn white(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, &[rng::DOMAIN_MONTE_CARLO, 8]);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

fn c8_nonlinear() -> Outcome {
    let mut c = Checks::default();
    let mono: Vec<f64> = (0..500).map(|i| i as f64 * 0.3).collect();
    let pe = permutation_entropy(&mono, 3, 1).unwrap();
    c.check(format!("PE(monotone) = {pe}"), pe == 0.0);
    let se = sample_entropy(&[5.0; 300], 2, 0.2).unwrap();
    c.check(format!("SampEn(constant) = {se}"), se == 0.0);

    let (mut w_rng, mut b_rng) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for seed in 0..20 {
        let x = white(seed, 4096);
        let a = nvi_core::morphology::dfa_alpha(&x).unwrap();
        w_rng = (w_rng.0.min(a), w_rng.1.max(a));
        let mut acc = 0.0;
        let walk: Vec<f64> = x.iter().map(|v| { acc += v; acc }).collect();
        let b = nvi_core::morphology::dfa_alpha(&walk).unwrap();
        b_rng = (b_rng.0.min(b), b_rng.1.max(b));
    }
    c.check(
        format!("DFA white in [{:.3}, {:.3}]", w_rng.0, w_rng.1),
        w_rng.0 >= 0.4 && w_rng.1 <= 0.6,
    );
    c.check(
        format!("DFA cumsum in [{:.3}, {:.3}]", b_rng.0, b_rng.1),
        b_rng.0 >= 1.35 && b_rng.1 <= 1.65,
    );

    let fs = 100.0;
    let tone: Vec<f64> = (0..6000).map(|i| (2.0 * std::f64::consts::PI * 1.2 * i as f64 / fs).sin()).collect();
    let ff: FeatureVector = freq_features(&TimeSeries::new(fs, tone).unwrap()).unwrap();
    let h = ff.get("freq_spectral_entropy").unwrap();
    c.check(format!("spectral entropy(tone) {h:.4} < 0.2"), h < 0.2);

    let rec = gen_cardiac_recording(&CardiacParams::default(), 60.0, 125.0, SEED).unwrap();
    let meta = MetaCovariates::default();
    let base = extract_record(&rec.ppg, &PulseParams::default(), &meta).unwrap();
    let exact = [
        "morph_notch_ratio",
        "morph_augmentation_index",
        "morph_skewness",
        "morph_kurtosis",
        "nl_permutation_entropy",
        "nl_dfa_alpha",
    ];
    let mut worst_exact = 0.0f64;
    let mut worst_spec = 0.0f64;
    let mut missing = Vec::new();
    for k in [0.25, 3.0, 40.0] {
        let scaled = extract_record(&rec.ppg.scaled(k), &PulseParams::default(), &meta).unwrap();
        for name in exact {
            match (base.get(name), scaled.get(name)) {
                (Some(a), Some(b)) => worst_exact = worst_exact.max((a - b).abs()),
                _ => missing.push(name),
            }
        }
        match (base.get("freq_spectral_entropy"), scaled.get("freq_spectral_entropy")) {
            (Some(a), Some(b)) => worst_spec = worst_spec.max((a - b).abs()),
            _ => missing.push("freq_spectral_entropy"),
        }
    }
    c.check(
        format!("scale invariance: ratio features {worst_exact:.1e}, spectral {worst_spec:.1e}"),
        missing.is_empty() && worst_exact <= 1e-9 && worst_spec <= 1e-6,
    );
    c.outcome()
}

fn c9_bench() -> Outcome {
    let mut c = Checks::default();
    let r = bench_score(1_000_000, 10_000, SEED).unwrap();
    c.check("allocation counter installed", r.alloc_tracking);
    c.check(format!("hot path allocations {}", r.hot_path_allocations), r.hot_path_allocations == 0);
    c.check(
        format!("3 runs byte-identical (digest {})", r.run_digests[0]),
        r.deterministic && r.first_divergence.is_none(),
    );
    c.check(
        format!("latency p50 {} ns, p99 {} ns, max {} ns (informational)", r.p50_ns, r.p99_ns, r.max_ns),
        true,
    );
    c.outcome()
}

fn c10_biosense() -> Outcome {
    let mut c = Checks::default();
    for shape in [CurveShape::LogLinear, CurveShape::LogLogistic] {
        let m = ConductivityModel::default().with_shape(shape);
        let (lo, hi) = (m.conductivity(20.0).unwrap(), m.conductivity(80.0).unwrap());
        c.check(format!("{shape:?}: sigma(20)={lo:e}, sigma(80)={hi:e}"), lo == 1e-8 && hi == 1e-4);
        let grid: Vec<f64> = (0..1000).map(|i| 100.0 * i as f64 / 999.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&h| m.conductivity(h).unwrap()).collect();
        let gains: Vec<f64> = grid.iter().map(|&h| m.gain(h).unwrap()).collect();
        let mono = vals.windows(2).all(|w| w[1] >= w[0]) && gains.windows(2).all(|w| w[1] >= w[0]);
        c.check(format!("{shape:?}: monotone over 1000 points"), mono);
    }
    c.outcome()
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("1 NVI formula suite", 1, c1_formulas),
        ("2 degraded mode", 5, c2_degraded_mode),
        ("3 synthetic benchmark AUC band", 120, c3_benchmark_band),
        ("4 transformer desk-scale training", 900, c4_transformer),
        ("5 dynamics", 60, c5_dynamics),
        ("6 statistics oracles", 30, c6_statistics),
        ("7 PRV vs ground-truth agreement", 120, c7_prv_agreement),
        ("8 morphology/nonlinear invariants", 120, c8_nonlinear),
        ("9 determinism/latency bench", 60, c9_bench),
        ("10 biosense anchors", 1, c10_biosense),
    ];
    println!();
    let mut failed = Vec::new();
    for (name, limit_s, run) in criteria {
        let t0 = Instant::now();
        let out = run();
        let dt = t0.elapsed();
        let in_time = dt <= Duration::from_secs(limit_s);
        let pass = out.pass && in_time;
        println!(
            "{} criterion {name}: {} | {:.2} s (limit {limit_s} s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            dt.as_secs_f64(),
            if in_time { "" } else { ", exceeded" }
        );
        if !pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
