use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{gen_trajectory_with, Class, TrajectoryConfig, STABLE};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::TimeSeries;

pub const DEFAULT_MC_RUNS: usize = 100;
pub const RECOVERY_TAU_S: f64 = 60.0;
/// Scores are taken on block means of this length.
pub const SCORE_BLOCK_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub intensity: f64,
    pub runs: usize,
    pub mean_min_nvi: f64,
    pub sd_min_nvi: f64,
    /// Baseline setpoint score minus `mean_min_nvi`.
    pub mean_decline: f64,
}

/// Minimum post-onset composite score per run, summarised per intensity.
/// Run `r` uses the stream `(seed, [monte_carlo, r])` at every intensity, so
/// the grid is compared on common noise.
pub fn mc_perturbation(intensities: &[f64], runs: usize, cfg: &TrajectoryConfig, seed: u64) -> Result<Vec<McSummary>> {
    if runs < 2 {
        return Err(Error::InvalidParameter("mc_perturbation needs at least 2 runs".into()));
    }
    if let Some(i) = intensities.iter().find(|i| !(0.0..=1.0).contains(*i)) {
        return Err(Error::InvalidParameter(format!("intensity {i} outside [0, 1]")));
    }
    cfg.validate()?;
    let baseline = STABLE.score()?.score;
    intensities
        .iter()
        .map(|&intensity| {
            let c = TrajectoryConfig { intensity, ..*cfg };
            let mins = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let mut rng = rng::stream(seed, &[rng::DOMAIN_MONTE_CARLO, r as u64]);
                    let t = gen_trajectory_with(&c, Class::Nvi, &mut rng)?;
                    let onset_s = t.onset_index as f64 / t.fs;
                    let blocks = t.block_scores(SCORE_BLOCK_S)?;
                    let post = blocks.iter().filter(|(s, _)| *s >= onset_s - 1e-9);
                    let min = post.map(|b| b.1).fold(f64::INFINITY, f64::min);
                    Ok(if min.is_finite() {
                        min
                    } else {
                        blocks.iter().map(|b| b.1).fold(f64::INFINITY, f64::min)
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = crate::signal::mean(&mins);
            let sd = crate::signal::sample_var(&mins).sqrt();
            Ok(McSummary {
                intensity,
                runs,
                mean_min_nvi: mean,
                sd_min_nvi: sd,
                mean_decline: baseline - mean,
            })
        })
        .collect()
}

/// `base - (base - floor) * exp(-t / tau)` sampled at `fs` over `[0, duration]`.
pub fn recovery_curve(nvi_floor: f64, nvi_base: f64, tau_s: f64, duration_s: f64, fs: f64) -> Result<TimeSeries> {
    if !(tau_s.is_finite() && tau_s > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau_s}")));
    }
    if !(nvi_floor < nvi_base) {
        return Err(Error::InvalidParameter(format!(
            "floor {nvi_floor} must be below base {nvi_base}"
        )));
    }
    if !(duration_s > 0.0 && fs > 0.0) {
        return Err(Error::InvalidParameter("duration and fs must be positive".into()));
    }
    let n = (duration_s * fs + 1e-9).floor() as usize + 1;
    let d = nvi_base - nvi_floor;
    let x = (0..n)
        .map(|i| nvi_base - d * (-(i as f64 / fs) / tau_s).exp())
        .collect();
    TimeSeries::new(fs, x).map(|t| t.with_label("nvi", "score"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryFit {
    pub tau_s: f64,
    pub nvi_base: f64,
    pub nvi_floor: f64,
    pub rmse: f64,
}

/// Least-squares fit of `base - delta * exp(-t / tau)`: golden-section search
/// on `ln tau`, with base and delta solved linearly at each step.
pub fn fit_recovery(curve: &TimeSeries) -> Result<RecoveryFit> {
    curve.validate()?;
    if curve.len() < 4 {
        return Err(Error::TooShort { needed: 4, got: curve.len() });
    }
    let t: Vec<f64> = (0..curve.len()).map(|i| i as f64 / curve.fs).collect();
    let y = &curve.samples;
    let solve = |tau: f64| -> (f64, f64, f64) {
        let e: Vec<f64> = t.iter().map(|ti| (-ti / tau).exp()).collect();
        let n = y.len() as f64;
        let (se, see) = (e.iter().sum::<f64>(), e.iter().map(|v| v * v).sum::<f64>());
        let (sy, sey) = (y.iter().sum::<f64>(), e.iter().zip(y).map(|(a, b)| a * b).sum::<f64>());
        let det = n * see - se * se;
        if det.abs() < 1e-300 {
            return (f64::INFINITY, sy / n, 0.0);
        }
        // y = base + c * e with c = -delta
        let base = (see * sy - se * sey) / det;
        let c = (n * sey - se * sy) / det;
        let sse = e.iter().zip(y).map(|(ei, yi)| (yi - base - c * ei).powi(2)).sum();
        (sse, base, -c)
    };
    let span = t[t.len() - 1];
    let (mut a, mut b) = ((0.05 * t[1]).ln(), (20.0 * span).ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (solve(c.exp()).0, solve(d.exp()).0);
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = solve(c.exp()).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = solve(d.exp()).0;
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let (sse, base, delta) = solve(tau);
    Ok(RecoveryFit {
        tau_s: tau,
        nvi_base: base,
        nvi_floor: base - delta,
        rmse: (sse / y.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovery_examples() {
        let c = recovery_curve(40.0, 85.0, 60.0, 300.0, 1.0).unwrap();
        assert_eq!(c.samples[0], 40.0);
        let at_tau = 40.0 + (1.0 - (-1.0f64).exp()) * 45.0;
        assert!((c.samples[60] - at_tau).abs() < 1e-12);
        assert!((c.samples[300] - 85.0).abs() < 0.01 * 85.0);
        assert!(c.samples.windows(2).all(|w| w[1] > w[0]));
        assert!(c.samples.iter().all(|v| *v < 85.0));
    }

    #[test]
    fn recovery_errors() {
        assert!(matches!(recovery_curve(40.0, 85.0, 0.0, 10.0, 1.0), Err(Error::Domain(_))));
        assert!(recovery_curve(90.0, 85.0, 60.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn fit_recovers_tau() {
        for tau in [20.0, 60.0, 150.0] {
            let c = recovery_curve(35.0, 84.0, tau, 300.0, 2.0).unwrap();
            let f = fit_recovery(&c).unwrap();
            assert!((f.tau_s - tau).abs() < 1e-4 * tau, "{tau}: {f:?}");
            assert!((f.nvi_base - 84.0).abs() < 1e-6);
            assert!((f.nvi_floor - 35.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mc_grid_is_monotone() {
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let s = mc_perturbation(&grid, 40, &TrajectoryConfig::default(), 42).unwrap();
        for w in s.windows(2) {
            assert!(w[1].mean_min_nvi <= w[0].mean_min_nvi + w[0].sd_min_nvi.max(w[1].sd_min_nvi));
        }
        assert!(s[0].mean_min_nvi > 80.0, "{:?}", s[0]);
        assert!(s[4].mean_min_nvi < 60.0, "{:?}", s[4]);
    }

    #[test]
    fn mc_rejects_bad_intensity() {
        assert!(mc_perturbation(&[1.2], 10, &TrajectoryConfig::default(), 1).is_err());
    }
}
