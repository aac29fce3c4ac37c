use super::{median, FeatureVector, MORPH_FEATURES};
use crate::error::{Error, Result};
use crate::signal::{PeakList, TimeSeries};

/// Secondary peaks smaller than this fraction of the primary amplitude above
/// the notch are treated as noise.
const SECONDARY_MIN_RISE: f64 = 0.01;

/// One trough-to-trough beat.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSegment {
    pub samples: Vec<f64>,
    pub fs: f64,
    /// Index of the segment maximum.
    pub peak_index: usize,
    /// Index of the first sample in the source record.
    pub start_index: usize,
}

impl BeatSegment {
    pub fn new(samples: Vec<f64>, fs: f64, start_index: usize) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::TooShort {
                needed: 3,
                got: samples.len(),
            });
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidParameter(format!("fs must be positive, got {fs}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let peak_index = argmax(&samples);
        Ok(Self {
            samples,
            fs,
            peak_index,
            start_index,
        })
    }

    pub fn duration_s(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.fs
    }
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

fn argmin(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v < x[best] {
            best = i;
        }
    }
    best
}

/// Trough-to-trough segmentation. Troughs are the minima between consecutive
/// peaks, so `m` peaks yield `m - 2` complete beats.
pub fn segment_beats(ppg: &TimeSeries, peaks: &PeakList) -> Result<Vec<BeatSegment>> {
    if peaks.indices.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "beat segmentation needs at least 3 peaks, got {}",
            peaks.indices.len()
        )));
    }
    let x = &ppg.samples;
    let mut troughs = Vec::with_capacity(peaks.indices.len() - 1);
    for w in peaks.indices.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a || b >= x.len() {
            return Err(Error::InvalidParameter("peak indices must be increasing and in range".into()));
        }
        troughs.push(a + argmin(&x[a..=b]));
    }
    troughs
        .windows(2)
        .filter(|w| w[1] >= w[0] + 2)
        .map(|w| BeatSegment::new(x[w[0]..=w[1]].to_vec(), ppg.fs, w[0]))
        .collect()
}

struct BeatValues {
    rise: f64,
    fall: f64,
    width: f64,
    area: f64,
    aug: f64,
    notch: f64,
    skew: Option<f64>,
    kurt: Option<f64>,
    amplitude: f64,
    area_ratio: Option<f64>,
    pi: Option<f64>,
    duration: f64,
}

fn trapz(y: &[f64]) -> f64 {
    y.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum()
}

/// Linear crossing position of `level` between samples `i` and `j`.
fn crossing(y: &[f64], i: usize, j: usize, level: f64) -> f64 {
    let (a, b) = (y[i], y[j]);
    if (b - a).abs() < f64::EPSILON {
        return i as f64;
    }
    i as f64 + (level - a) / (b - a) * (j as f64 - i as f64)
}

fn beat_values(beat: &BeatSegment) -> Option<BeatValues> {
    let s = &beat.samples;
    let n = s.len();
    let fs = beat.fs;
    let last = (n - 1) as f64;
    let y: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(i, &v)| v - (s[0] + (s[n - 1] - s[0]) * i as f64 / last))
        .collect();
    let p = argmax(&y);
    let amp = y[p];
    if amp <= 0.0 {
        return None;
    }
    // parabolic refinement of the peak position
    let tp = if p > 0 && p + 1 < n {
        let (a, b, c) = (y[p - 1], y[p], y[p + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            p as f64 + (0.5 * (a - c) / den).clamp(-0.5, 0.5)
        } else {
            p as f64
        }
    } else {
        p as f64
    };

    let half = 0.5 * amp;
    let left = (0..p)
        .rev()
        .find(|&i| y[i] < half)
        .map_or(0.0, |i| crossing(&y, i, i + 1, half));
    let right = (p + 1..n)
        .find(|&i| y[i] < half)
        .map_or(last, |i| crossing(&y, i - 1, i, half));

    let area = trapz(&y) / fs;
    let area_ratio = (area > 0.0).then(|| trapz(&y[..=p]) / fs / area);

    // highest post-systolic local maximum that rises clearly above the notch
    let (mut aug, mut notch) = (0.0, 0.0);
    let mut best: Option<(usize, usize)> = None;
    for k in p + 2..n.saturating_sub(1) {
        if y[k] > y[k - 1] && y[k] >= y[k + 1] {
            let kn = p + argmin(&y[p..=k]);
            if y[k] - y[kn] >= SECONDARY_MIN_RISE * amp && best.is_none_or(|(b, _)| y[k] > y[b]) {
                best = Some((k, kn));
            }
        }
    }
    if let Some((k, kn)) = best {
        aug = y[k] / amp;
        notch = y[kn] / amp;
    }

    // shape moments of the beat read as a density over time
    let w: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    let wsum: f64 = w.iter().sum();
    let (skew, kurt) = if wsum > 0.0 {
        let mu = w.iter().enumerate().map(|(i, wi)| wi * i as f64).sum::<f64>() / wsum;
        let m = |k: i32| {
            w.iter()
                .enumerate()
                .map(|(i, wi)| wi * (i as f64 - mu).powi(k))
                .sum::<f64>()
                / wsum
        };
        let var = m(2);
        if var > 0.0 {
            (Some(m(3) / var.powf(1.5)), Some(m(4) / (var * var) - 3.0))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };

    let mean = s.iter().sum::<f64>() / n as f64;
    Some(BeatValues {
        rise: tp / fs,
        fall: (last - tp) / fs,
        width: (right - left) / fs,
        area,
        aug,
        notch,
        skew,
        kurt,
        amplitude: amp,
        area_ratio,
        pi: (mean > 0.0).then(|| amp / mean),
        duration: last / fs,
    })
}

/// The 14 `morph_*` features, each the median over beats.
pub fn morph_features(beats: &[BeatSegment]) -> Result<FeatureVector> {
    if beats.is_empty() {
        return Err(Error::InsufficientData("morphology needs at least one beat".into()));
    }
    let vals: Vec<BeatValues> = beats.iter().filter_map(beat_values).collect();
    let med = |f: &dyn Fn(&BeatValues) -> Option<f64>| {
        let mut v: Vec<f64> = vals.iter().filter_map(f).filter(|x| x.is_finite()).collect();
        median(&mut v)
    };
    let rise = med(&|b| Some(b.rise));
    let fall = med(&|b| Some(b.fall));
    let durations: Vec<f64> = beats.iter().map(BeatSegment::duration_s).collect();
    let cv = if durations.len() >= 2 {
        let m = crate::signal::mean(&durations);
        let sd = crate::signal::sample_var(&durations).sqrt();
        (m > 0.0).then(|| sd / m)
    } else {
        None
    };
    let values = [
        rise,
        fall,
        med(&|b| Some(b.width)),
        med(&|b| Some(b.area)),
        med(&|b| Some(b.aug)),
        med(&|b| Some(b.notch)),
        med(&|b| b.skew),
        med(&|b| b.kurt),
        med(&|b| Some(b.amplitude)),
        med(&|b| (b.fall > 0.0).then(|| b.rise / b.fall)),
        med(&|b| b.area_ratio),
        cv,
        med(&|b| b.pi),
        med(&|b| Some(b.duration)),
    ];
    let mut fv = FeatureVector::new();
    for (name, v) in MORPH_FEATURES.iter().zip(values) {
        fv.push(name, v)?;
    }
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::detect_peaks;
    use std::f64::consts::PI;

    fn beat_from(f: impl Fn(f64) -> f64, n: usize, fs: f64) -> BeatSegment {
        let s = (0..n).map(|i| f(i as f64 / (n - 1) as f64)).collect();
        BeatSegment::new(s, fs, 0).unwrap()
    }

    fn triangle(u: f64) -> f64 {
        1.0 + if u < 0.5 { u } else { 1.0 - u }
    }

    fn sawtooth(u: f64) -> f64 {
        1.0 + if u < 0.2 { u / 0.2 } else { (1.0 - u) / 0.8 }
    }

    fn dicrotic(u: f64) -> f64 {
        let g = |c: f64, w: f64| (-((u - c) / w).powi(2)).exp();
        2.0 + g(0.25, 0.08) + 0.4 * g(0.6, 0.08)
    }

    #[test]
    fn pulse_train_segments_into_complete_beats() {
        let fs = 100.0;
        let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * i as f64 / fs - PI / 2.0).sin()).collect();
        let ts = TimeSeries::new(fs, x).unwrap();
        let peaks = detect_peaks(&ts, 0.3, 1.0).unwrap();
        assert_eq!(peaks.indices.len(), 10);
        let beats = segment_beats(&ts, &peaks).unwrap();
        assert_eq!(beats.len(), 8);
        for b in &beats {
            let mid = (b.samples.len() - 1) as f64 / 2.0;
            assert!((b.peak_index as f64 - mid).abs() <= 1.0);
            let max = b.samples.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(b.samples[b.peak_index], max);
        }
    }

    #[test]
    fn two_peaks_is_error() {
        let ts = TimeSeries::new(10.0, vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let pl = PeakList::from_indices(&ts, vec![1, 3]);
        assert!(matches!(segment_beats(&ts, &pl), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn symmetric_triangle() {
        let fv = morph_features(&[beat_from(triangle, 101, 100.0)]).unwrap();
        let rise = fv.get("morph_rise_time_s").unwrap();
        let fall = fv.get("morph_fall_time_s").unwrap();
        assert!((rise - fall).abs() < 1e-12);
        assert!(fv.get("morph_skewness").unwrap().abs() < 1e-9);
        assert_eq!(fv.get("morph_augmentation_index"), Some(0.0));
        assert_eq!(fv.get("morph_notch_ratio"), Some(0.0));
        assert!((fv.get("morph_pulse_width_s").unwrap() - 0.5).abs() < 1e-9);
        assert!((fv.get("morph_area_ratio").unwrap() - 0.5).abs() < 1e-9);
        assert!((fv.get("morph_amplitude").unwrap() - 0.5).abs() < 1e-12);
        assert!(fv.get("morph_beat_interval_cv").is_none());
    }

    #[test]
    fn sawtooth_is_right_skewed() {
        let fv = morph_features(&[beat_from(sawtooth, 101, 100.0)]).unwrap();
        assert!(fv.get("morph_rise_time_s").unwrap() < fv.get("morph_fall_time_s").unwrap());
        assert!(fv.get("morph_skewness").unwrap() > 0.0);
        assert!(fv.get("morph_rise_fall_ratio").unwrap() < 1.0);
    }

    #[test]
    fn secondary_peak_detected() {
        let fv = morph_features(&[beat_from(dicrotic, 201, 200.0)]).unwrap();
        let aug = fv.get("morph_augmentation_index").unwrap();
        let notch = fv.get("morph_notch_ratio").unwrap();
        assert!(aug > 0.3 && aug < 0.5, "aug {aug}");
        assert!(notch > 0.0 && notch < aug, "notch {notch}");
    }

    #[test]
    fn amplitude_scale_invariance() {
        let b = beat_from(dicrotic, 201, 200.0);
        let k = 3.7;
        let scaled = BeatSegment::new(b.samples.iter().map(|v| v * k).collect(), b.fs, 0).unwrap();
        let a = morph_features(&[b]).unwrap();
        let c = morph_features(&[scaled]).unwrap();
        for name in [
            "morph_notch_ratio",
            "morph_augmentation_index",
            "morph_skewness",
            "morph_kurtosis",
        ] {
            let (x, y) = (a.get(name).unwrap(), c.get(name).unwrap());
            assert!((x - y).abs() < 1e-9, "{name}: {x} vs {y}");
        }
    }

    #[test]
    fn rise_time_stable_under_upsampling() {
        for n in [61, 83, 120] {
            let fs = 100.0;
            let b1 = beat_from(dicrotic, n, fs);
            let b2 = beat_from(dicrotic, 2 * n - 1, 2.0 * fs);
            let r1 = morph_features(&[b1]).unwrap().get("morph_rise_time_s").unwrap();
            let r2 = morph_features(&[b2]).unwrap().get("morph_rise_time_s").unwrap();
            assert!((r1 - r2).abs() < 1.0 / (2.0 * fs), "{r1} vs {r2}");
        }
    }

    #[test]
    fn no_beats_is_error() {
        assert!(morph_features(&[]).is_err());
    }
}
