use super::{FeatureVector, FREQ_FEATURES};
use crate::error::{Error, Result};
use crate::signal::spectral::welch;
use crate::signal::TimeSeries;

const SEGMENT_S: f64 = 8.0;
const MIN_DURATION_S: f64 = 2.0;
const ROLLOFF_FRACTION: f64 = 0.85;
const CARDIAC_BAND: (f64, f64) = (0.5, 3.0);
const HIGH_BAND: (f64, f64) = (3.0, 12.0);

/// The 7 `freq_*` features from a Welch PSD of the mean-removed record.
/// The DC bin is excluded. A flat record leaves every spectral-shape feature
/// missing.
pub fn freq_features(ppg: &TimeSeries) -> Result<FeatureVector> {
    ppg.validate()?;
    let dur = ppg.len() as f64 / ppg.fs;
    if dur < MIN_DURATION_S - 1e-9 {
        return Err(Error::InsufficientData(format!(
            "spectral features need {MIN_DURATION_S} s, got {dur:.3} s"
        )));
    }
    let m = ppg.mean();
    let x: Vec<f64> = ppg.samples.iter().map(|v| v - m).collect();
    let nperseg = ((SEGMENT_S * ppg.fs).round() as usize).max(2);
    let psd = welch(&x, ppg.fs, nperseg)?;
    let f = &psd.freqs[1..];
    let p = &psd.density[1..];
    let total: f64 = p.iter().sum();

    let mut fv = FeatureVector::new();
    let range = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
    if !(total > 0.0) || range <= 1e-12 * m.abs().max(1.0) {
        for name in FREQ_FEATURES {
            fv.push(name, None)?;
        }
        return Ok(fv);
    }

    let mut dom = 0;
    for i in 0..p.len() {
        if p[i] > p[dom] {
            dom = i;
        }
    }
    let entropy = if p.len() > 1 {
        let h: f64 = p
            .iter()
            .map(|v| v / total)
            .filter(|q| *q > 0.0)
            .map(|q| -q * q.ln())
            .sum();
        Some((h / (p.len() as f64).ln()).clamp(0.0, 1.0))
    } else {
        None
    };
    let centroid = f.iter().zip(p).map(|(f, p)| f * p).sum::<f64>() / total;
    let spread = (f
        .iter()
        .zip(p)
        .map(|(f, p)| (f - centroid).powi(2) * p)
        .sum::<f64>()
        / total)
        .sqrt();
    let mut cum = 0.0;
    let mut rolloff = f[f.len() - 1];
    for (fi, pi) in f.iter().zip(p) {
        cum += pi;
        if cum >= ROLLOFF_FRACTION * total {
            rolloff = *fi;
            break;
        }
    }
    let band = |(lo, hi): (f64, f64)| {
        f.iter()
            .zip(p)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p)
            .sum::<f64>()
            / total
    };
    let values = [
        Some(f[dom]),
        entropy,
        Some(centroid),
        Some(spread),
        Some(rolloff),
        Some(band(CARDIAC_BAND)),
        Some(band(HIGH_BAND)),
    ];
    for (name, v) in FREQ_FEATURES.iter().zip(values) {
        fv.push(name, v)?;
    }
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn tone(freqs: &[f64], fs: f64, dur: f64) -> TimeSeries {
        let n = (fs * dur) as usize;
        let x = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                freqs.iter().map(|f| (2.0 * PI * f * t).sin()).sum::<f64>()
            })
            .collect();
        TimeSeries::new(fs, x).unwrap()
    }

    #[test]
    fn pure_tone() {
        let fv = freq_features(&tone(&[1.2], 125.0, 60.0)).unwrap();
        let dom = fv.get("freq_dominant_hz").unwrap();
        assert!((dom - 1.2).abs() <= 1.0 / SEGMENT_S, "dominant {dom}");
        assert!(fv.get("freq_spectral_entropy").unwrap() < 0.2);
        assert!(fv.get("freq_power_ratio_cardiac").unwrap() > 0.99);
    }

    #[test]
    fn two_tones_centroid() {
        let fv = freq_features(&tone(&[1.0, 2.0], 100.0, 64.0)).unwrap();
        let c = fv.get("freq_spectral_centroid_hz").unwrap();
        assert!((c - 1.5).abs() < 0.02, "centroid {c}");
        assert!((fv.get("freq_spectral_spread_hz").unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn white_noise_entropy() {
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..7500).map(|_| StandardNormal.sample(&mut rng)).collect();
            let fv = freq_features(&TimeSeries::new(125.0, x).unwrap()).unwrap();
            let h = fv.get("freq_spectral_entropy").unwrap();
            assert!(h > 0.9 && h <= 1.0, "seed {seed}: {h}");
        }
    }

    #[test]
    fn flat_signal_flags_entropy_missing() {
        let fv = freq_features(&TimeSeries::new(50.0, vec![3.0; 500]).unwrap()).unwrap();
        assert_eq!(fv.len(), 7);
        assert!(fv.contains("freq_spectral_entropy"));
        assert!(fv.get("freq_spectral_entropy").is_none());
    }

    #[test]
    fn too_short() {
        assert!(freq_features(&TimeSeries::new(50.0, vec![0.0; 60]).unwrap()).is_err());
    }

    #[test]
    fn entropy_scale_invariant() {
        let ts = tone(&[1.1, 2.7, 5.0], 100.0, 30.0);
        let a = freq_features(&ts).unwrap().get("freq_spectral_entropy").unwrap();
        let b = freq_features(&ts.scaled(42.0)).unwrap().get("freq_spectral_entropy").unwrap();
        assert!((a - b).abs() < 1e-6);
    }
}
