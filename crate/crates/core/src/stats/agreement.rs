use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check_finite, mean, sample_sd};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from the t distribution with n - 2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pearson_r: Option<f64>,
    pub bias: f64,
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub n: usize,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "Pearson r needs at least 3 pairs, got {n}"
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain(
            "correlation undefined for a zero-variance input".into(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Correlation { r, p_value, n })
}

/// Bias and 95 % limits of agreement of `a - b`.
pub fn bland_altman(a: &[f64], b: &[f64]) -> Result<AgreementReport> {
    check_pair(a, b)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "Bland-Altman needs at least 2 pairs, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let bias = mean(&diffs);
    let sd_diff = sample_sd(&diffs);
    Ok(AgreementReport {
        pearson_r: pearson(a, b).ok().map(|c| c.r),
        bias,
        sd_diff,
        loa_low: bias - 1.96 * sd_diff,
        loa_high: bias + 1.96 * sd_diff,
        n,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS test needs two non-empty samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    // Kolmogorov survival function
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    let p = if d == 0.0 { 1.0 } else { p.clamp(0.0, 1.0) };
    Ok((d, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let yn: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y2).unwrap().r - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &yn).unwrap().r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_r() {
        let c = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((c.r - 0.8).abs() < 1e-12);
        // t = 0.8 * sqrt(2 / 0.36) = 1.8856, df 2 -> p = 0.2
        assert!((c.p_value - 0.2).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bland_altman_worked_example() {
        let r = bland_altman(&[10.0, 20.0, 30.0], &[12.0, 19.0, 33.0]).unwrap();
        assert!((r.bias + 4.0 / 3.0).abs() < 1e-9);
        let sd = (13.0f64 / 3.0).sqrt();
        assert!((r.sd_diff - sd).abs() < 1e-9);
        assert!((r.loa_low - (-4.0 / 3.0 - 1.96 * sd)).abs() < 1e-9);
        assert!((r.loa_high - (-4.0 / 3.0 + 1.96 * sd)).abs() < 1e-9);
        assert!((r.loa_low + 5.413).abs() < 1e-3 && (r.loa_high - 2.747).abs() < 1e-3);
    }

    #[test]
    fn bland_altman_degenerate_cases() {
        let a = [3.0, 5.0, 9.0];
        let r = bland_altman(&a, &a).unwrap();
        assert_eq!((r.bias, r.loa_low, r.loa_high), (0.0, 0.0, 0.0));
        let b: Vec<f64> = a.iter().map(|v| v - 5.0).collect();
        let r = bland_altman(&a, &b).unwrap();
        assert_eq!(r.bias, 5.0);
        assert_eq!(r.sd_diff, 0.0);
        assert!(matches!(
            bland_altman(&a, &[1.0]),
            Err(Error::LengthMismatch { left: 3, right: 1 })
        ));
    }

    #[test]
    fn bland_altman_antisymmetry() {
        let a = [1.0, 4.0, 2.5, 8.0, 3.0];
        let b = [1.5, 3.0, 2.0, 9.5, 2.0];
        let ab = bland_altman(&a, &b).unwrap();
        let ba = bland_altman(&b, &a).unwrap();
        assert!((ab.bias + ba.bias).abs() < 1e-12);
        assert!(((ab.loa_high - ab.loa_low) - (ba.loa_high - ba.loa_low)).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap(), (0.0, 1.0));
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert!(ks_two_sample(&a, &b).unwrap().1 < 1e-6);
    }
}
