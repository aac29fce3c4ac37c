use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_finite, class_counts, midranks};
use crate::error::{Error, Result};
use crate::rng;

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    check_finite(scores)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData(
            "ROC analysis needs both classes present".into(),
        ));
    }
    Ok((pos, neg))
}

/// P(score_pos > score_neg) + 0.5 P(tie), from the rank sum of the positives.
/// Higher scores mean "more positive".
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    Ok(auc_unchecked(scores, labels, pos, neg))
}

fn auc_unchecked(scores: &[f64], labels: &[bool], pos: usize, neg: usize) -> f64 {
    let ranks = midranks(scores);
    let r_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter_map(|(r, &l)| l.then_some(*r))
        .sum();
    let np = pos as f64;
    (r_pos - np * (np + 1.0) / 2.0) / (np * neg as f64)
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile 95 % interval of the AUC over `iters` class-stratified
/// bootstrap resamples. Iteration `i` draws from its own stream, so the result
/// does not depend on thread scheduling.
pub fn bootstrap_auc_ci(scores: &[f64], labels: &[bool], iters: usize, seed: u64) -> Result<(f64, f64)> {
    let (pos, neg) = check_binary(scores, labels)?;
    if iters == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one iteration".into()));
    }
    let pos_idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg_idx: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let mut aucs: Vec<f64> = (0..iters)
        .into_par_iter()
        .map(|it| {
            let mut r = rng::stream(seed, &[rng::DOMAIN_BOOTSTRAP, it as u64]);
            let mut s = Vec::with_capacity(pos + neg);
            let mut l = Vec::with_capacity(pos + neg);
            for _ in 0..pos {
                s.push(scores[pos_idx[r.random_range(0..pos)]]);
                l.push(true);
            }
            for _ in 0..neg {
                s.push(scores[neg_idx[r.random_range(0..neg)]]);
                l.push(false);
            }
            auc_unchecked(&s, &l, pos, neg)
        })
        .collect();
    aucs.sort_by(f64::total_cmp);
    Ok((percentile(&aucs, 0.025), percentile(&aucs, 0.975)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoudenPoint {
    pub threshold: f64,
    pub j: f64,
    pub sens: f64,
    pub spec: f64,
    /// NaN when nothing is predicted positive.
    pub ppv: f64,
    /// NaN when nothing is predicted negative.
    pub npv: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Threshold maximising `sens + spec - 1` over midpoints between adjacent
/// distinct scores; predicted positive means `score >= threshold`. Equal J is
/// resolved toward the higher sensitivity.
pub fn youden_threshold(scores: &[f64], labels: &[bool]) -> Result<YoudenPoint> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let point = |threshold: f64, tp: usize, fp: usize| {
        let (fn_, tn) = (pos - tp, neg - fp);
        let sens = tp as f64 / pos as f64;
        let spec = tn as f64 / neg as f64;
        YoudenPoint {
            threshold,
            j: sens + spec - 1.0,
            sens,
            spec,
            ppv: ratio(tp, tp + fp),
            npv: ratio(tn, tn + fn_),
        }
    };
    // Walk thresholds from high to low; after consuming a run of equal
    // scores, the next midpoint admits exactly that run as positive.
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best: Option<YoudenPoint> = None;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let next = scores[order[i]];
        let cand = point(0.5 * (v + next), tp, fp);
        best = Some(match best {
            None => cand,
            Some(b) if cand.j > b.j + 1e-12 => cand,
            Some(b) if (cand.j - b.j).abs() <= 1e-12 && cand.sens > b.sens => cand,
            Some(b) => b,
        });
    }
    Ok(best.unwrap_or_else(|| point(scores[0], pos, neg)))
}

/// Discrimination summary at the Youden-optimal operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub auc_ci_low: f64,
    pub auc_ci_high: f64,
    pub sens: f64,
    pub spec: f64,
    pub ppv: f64,
    pub npv: f64,
    pub youden_threshold: f64,
    pub per_fold_aucs: Vec<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub bootstrap_iters: usize,
}

pub fn evaluate(scores: &[f64], labels: &[bool], iters: usize, seed: u64) -> Result<EvalReport> {
    let (n_pos, n_neg) = check_binary(scores, labels)?;
    let auc = roc_auc(scores, labels)?;
    let (auc_ci_low, auc_ci_high) = bootstrap_auc_ci(scores, labels, iters, seed)?;
    let y = youden_threshold(scores, labels)?;
    Ok(EvalReport {
        auc,
        auc_ci_low,
        auc_ci_high,
        sens: y.sens,
        spec: y.spec,
        ppv: y.ppv,
        npv: y.npv,
        youden_threshold: y.threshold,
        per_fold_aucs: Vec::new(),
        n_pos,
        n_neg,
        bootstrap_iters: iters,
    })
}

impl EvalReport {
    /// `name | AUC [low–high] | sens | spec | PPV | NPV`
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{name} | {:.3} [{:.3}–{:.3}] | {:.3} | {:.3} | {:.3} | {:.3}",
            self.auc, self.auc_ci_low, self.auc_ci_high, self.sens, self.spec, self.ppv, self.npv
        )
    }

    pub const TABLE_HEADER: &'static str = "Model | AUC [95% CI] | Sens | Spec | PPV | NPV";
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let s = pos.iter().chain(neg).copied().collect();
        let l = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
        (s, l)
    }

    #[test]
    fn auc_examples() {
        let (s, l) = split(&[0.9, 0.8], &[0.1, 0.2]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 1.0);
        let (s, l) = split(&[0.8, 0.4], &[0.6, 0.2]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.75);
        let (s, l) = split(&[0.5, 0.5, 0.5], &[0.5, 0.5]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(youden_threshold(&[0.1, 0.2], &[false, false]).is_err());
    }

    #[test]
    fn bootstrap_perfect_and_deterministic() {
        let pos: Vec<f64> = (0..50).map(|i| 10.0 + i as f64).collect();
        let neg: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let (s, l) = split(&pos, &neg);
        assert_eq!(bootstrap_auc_ci(&s, &l, 200, 1).unwrap(), (1.0, 1.0));
        let (s, l) = split(&[0.8, 0.4, 0.7, 0.3, 0.55], &[0.6, 0.2, 0.5, 0.35, 0.1]);
        let a = bootstrap_auc_ci(&s, &l, 1000, 9).unwrap();
        let b = bootstrap_auc_ci(&s, &l, 1000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.0 <= a.1);
    }

    #[test]
    fn youden_examples() {
        let (s, l) = split(&[0.9, 0.8], &[0.1, 0.2]);
        let y = youden_threshold(&s, &l).unwrap();
        assert_eq!((y.j, y.sens, y.spec), (1.0, 1.0, 1.0));

        let (s, l) = split(&[0.5, 0.5], &[0.5]);
        let y = youden_threshold(&s, &l).unwrap();
        assert_eq!(y.j, 0.0);
        assert_eq!(y.threshold, 0.5);

        let (s, l) = split(&[0.8, 0.4], &[0.6, 0.2]);
        let y = youden_threshold(&s, &l).unwrap();
        assert!((y.threshold - 0.3).abs() < 1e-12);
        assert_eq!((y.sens, y.spec), (1.0, 0.5));
        assert!((y.j - 0.5).abs() < 1e-12);
    }

    /// Exhaustive sweep over every midpoint, used as an oracle.
    fn brute_youden(s: &[f64], l: &[bool]) -> (f64, f64) {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for w in v.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let tp = s.iter().zip(l).filter(|(x, y)| **y && **x >= t).count() as f64;
            let tn = s.iter().zip(l).filter(|(x, y)| !**y && **x < t).count() as f64;
            let p = l.iter().filter(|y| **y).count() as f64;
            let sens = tp / p;
            let j = sens + tn / (l.len() as f64 - p) - 1.0;
            if j > best.0 + 1e-12 || ((j - best.0).abs() <= 1e-12 && sens > best.1) {
                best = (j, sens);
            }
        }
        best
    }

    #[test]
    fn youden_matches_exhaustive_sweep() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 40) as f64 / (1u64 << 24) as f64
        };
        for _ in 0..50 {
            let s: Vec<f64> = (0..25).map(|_| (next() * 10.0).floor()).collect();
            let l: Vec<bool> = (0..25).map(|i| i % 3 == 0).collect();
            let y = youden_threshold(&s, &l).unwrap();
            let (j, sens) = brute_youden(&s, &l);
            assert!((y.j - j).abs() < 1e-12);
            assert!((y.sens - sens).abs() < 1e-12);
        }
    }

    #[test]
    fn table_row_format() {
        let (s, l) = split(&[0.9, 0.8, 0.3], &[0.1, 0.2, 0.4]);
        let r = evaluate(&s, &l, 100, 3).unwrap();
        let row = r.table_row("Composite");
        assert!(row.starts_with("Composite | 0.889 ["));
    }
}
