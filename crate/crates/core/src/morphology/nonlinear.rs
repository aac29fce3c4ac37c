use super::{FeatureVector, NONLINEAR_FEATURES};
use crate::error::{Error, Result};
use crate::signal::TimeSeries;

pub const MIN_SAMPLES: usize = 200;
pub const SAMPEN_M: usize = 2;
pub const SAMPEN_R_FACTOR: f64 = 0.2;
pub const PE_ORDER: usize = 3;
pub const PE_LAG: usize = 1;
const DFA_MIN_BOX: usize = 4;
const DFA_SCALES: usize = 20;

/// Sample entropy with tolerance `r` (absolute) and template length `m`,
/// self-matches excluded. `None` when no templates of length `m + 1` match.
pub fn sample_entropy(x: &[f64], m: usize, r: f64) -> Option<f64> {
    let n = x.len();
    if m == 0 || n <= m + 1 {
        return None;
    }
    let templates = n - m;
    let (mut b, mut a) = (0u64, 0u64);
    for i in 0..templates {
        for j in i + 1..templates {
            if (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r) {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    if a == 0 || b == 0 {
        return None;
    }
    Some((b as f64 / a as f64).ln())
}

/// Box sizes from `DFA_MIN_BOX` to `n / 4`, log-spaced, deduplicated.
fn dfa_scales(n: usize) -> Vec<usize> {
    let hi = n / 4;
    if hi < DFA_MIN_BOX {
        return Vec::new();
    }
    let (l0, l1) = ((DFA_MIN_BOX as f64).ln(), (hi as f64).ln());
    let mut s: Vec<usize> = (0..DFA_SCALES)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (DFA_SCALES - 1) as f64).exp().round() as usize)
        .collect();
    s.dedup();
    s
}

/// First-order detrended fluctuation analysis exponent.
pub fn dfa_alpha(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in x {
        acc += v - m;
        profile.push(acc);
    }
    let mut pts = Vec::new();
    for s in dfa_scales(n) {
        let boxes = n / s;
        // closed-form least squares against t = 0..s-1
        let sf = s as f64;
        let st = sf * (sf - 1.0) / 2.0;
        let stt = (sf - 1.0) * sf * (2.0 * sf - 1.0) / 6.0;
        let den = sf * stt - st * st;
        let mut rss = 0.0;
        for b in 0..boxes {
            let seg = &profile[b * s..(b + 1) * s];
            let (mut sy, mut sty, mut syy) = (0.0, 0.0, 0.0);
            for (t, y) in seg.iter().enumerate() {
                sy += y;
                sty += t as f64 * y;
                syy += y * y;
            }
            let slope = (sf * sty - st * sy) / den;
            let icpt = (sy - slope * st) / sf;
            rss += (syy - icpt * sy - slope * sty).max(0.0);
        }
        let f = (rss / (boxes * s) as f64).sqrt();
        if f > 0.0 && f.is_finite() {
            pts.push(((s as f64).ln(), f.ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Normalised permutation entropy in [0, 1]. Ties rank by position.
pub fn permutation_entropy(x: &[f64], order: usize, lag: usize) -> Option<f64> {
    if order < 2 || lag == 0 {
        return None;
    }
    let span = (order - 1) * lag;
    if x.len() <= span {
        return None;
    }
    let mut counts = std::collections::HashMap::<Vec<u8>, usize>::new();
    let total = x.len() - span;
    for i in 0..total {
        let mut idx: Vec<u8> = (0..order as u8).collect();
        idx.sort_by(|&a, &b| {
            x[i + a as usize * lag]
                .total_cmp(&x[i + b as usize * lag])
                .then(a.cmp(&b))
        });
        *counts.entry(idx).or_default() += 1;
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * p.recip().ln()
        })
        .sum();
    let max = (1..=order).map(|k| (k as f64).ln()).sum::<f64>();
    Some((h / max).clamp(0.0, 1.0))
}

/// The 3 `nl_*` features. A zero-variance record has sample entropy 0 and the
/// other two flagged missing.
pub fn nonlinear_features(ppg: &TimeSeries) -> Result<FeatureVector> {
    ppg.validate()?;
    let x = &ppg.samples;
    if x.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "nonlinear features need {MIN_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    let sd = crate::signal::sample_var(x).sqrt();
    let values = if sd == 0.0 {
        [Some(0.0), None, None]
    } else {
        [
            sample_entropy(x, SAMPEN_M, SAMPEN_R_FACTOR * sd),
            dfa_alpha(x),
            permutation_entropy(x, PE_ORDER, PE_LAG),
        ]
    };
    let mut fv = FeatureVector::new();
    for (name, v) in NONLINEAR_FEATURES.iter().zip(values) {
        fv.push(name, v)?;
    }
    Ok(fv)
}
