//! L2-regularised logistic regression fitted by Newton's method; the
//! feature-based reference model.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::tape::sigmoid;

const MAX_ITERS: usize = 100;
const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub l2: f64,
}

/// Channel means before and after `onset` for a channel-major window:
/// `[pre_0.., post_0..]`.
pub fn window_mean_features(window: &[f64], n_samples: usize, onset: usize) -> Vec<f64> {
    let channels = window.len() / n_samples.max(1);
    let onset = onset.clamp(1, n_samples.saturating_sub(1).max(1));
    let mut pre = Vec::with_capacity(channels);
    let mut post = Vec::with_capacity(channels);
    for c in 0..channels {
        let x = &window[c * n_samples..(c + 1) * n_samples];
        pre.push(x[..onset].iter().sum::<f64>() / onset as f64);
        post.push(x[onset..].iter().sum::<f64>() / (n_samples - onset).max(1) as f64);
    }
    pre.extend(post);
    pre
}

#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

impl LogisticModel {
    /// Fits on standardised features; `labels` true is the positive class.
    pub fn fit(x: &[Vec<f64>], labels: &[bool], l2: f64) -> Result<Self> {
        if x.is_empty() || x.len() != labels.len() {
            return Err(ModelError::EmptySplit("logistic fit needs matching non-empty inputs".into()));
        }
        let p = x[0].len();
        if x.iter().any(|r| r.len() != p || r.iter().any(|v| !v.is_finite())) {
            return Err(ModelError::NonFinite("logistic features".into()));
        }
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let sd: Vec<f64> = (0..p)
            .map(|j| {
                let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 1e-24 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| {
                let mut row: Vec<f64> = r.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect();
                row.push(1.0);
                row
            })
            .collect();
        let dim = p + 1;
        let mut w = vec![0.0; dim];
        for _ in 0..MAX_ITERS {
            let mut g = vec![0.0; dim];
            let mut h = vec![vec![0.0; dim]; dim];
            for (row, &y) in z.iter().zip(labels) {
                let s = sigmoid(row.iter().zip(&w).map(|(a, b)| a * b).sum());
                let r = s - y as u8 as f64;
                let q = s * (1.0 - s);
                for i in 0..dim {
                    g[i] += r * row[i];
                    for j in 0..dim {
                        h[i][j] += q * row[i] * row[j];
                    }
                }
            }
            for i in 0..p {
                g[i] += l2 * w[i];
                h[i][i] += l2;
            }
            h[p][p] += 1e-12;
            let Some(step) = solve(h, g) else { break };
            let mut norm = 0.0;
            for (wi, si) in w.iter_mut().zip(&step) {
                *wi -= si;
                norm += si * si;
            }
            if norm.sqrt() < TOL {
                break;
            }
        }
        let bias = w.pop().expect("bias term");
        Ok(Self {
            weights: w,
            bias,
            mean,
            sd,
            l2,
        })
    }

    /// Log-odds of the positive class.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .zip(&self.mean)
                .zip(&self.sd)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_shifted_classes() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 20) as f64 * 0.1 + if i < 20 { 0.0 } else { 2.5 }, (i % 3) as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let m = LogisticModel::fit(&x, &y, 1e-3).unwrap();
        assert!(m.weights[0] > 0.0);
        let correct = x.iter().zip(&y).filter(|(r, &l)| (m.predict_proba(r) > 0.5) == l).count();
        assert!(correct >= 36, "{correct}");
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![((i * 7) % 11) as f64, ((i * 3) % 5) as f64]).collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 5) % 3 == 0).collect();
        let m = LogisticModel::fit(&x, &y, 0.1).unwrap();
        let mut g = vec![0.0; 3];
        for (r, &l) in x.iter().zip(&y) {
            let e = m.predict_proba(r) - l as u8 as f64;
            g[0] += e * (r[0] - m.mean[0]) / m.sd[0];
            g[1] += e * (r[1] - m.mean[1]) / m.sd[1];
            g[2] += e;
        }
        g[0] += 0.1 * m.weights[0];
        g[1] += 0.1 * m.weights[1];
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn mean_features_layout() {
        let w = [1.0, 1.0, 3.0, 3.0, 10.0, 10.0, 20.0, 20.0];
        assert_eq!(window_mean_features(&w, 4, 2), vec![1.0, 10.0, 3.0, 20.0]);
    }
}
