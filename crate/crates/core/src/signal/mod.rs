//! Waveform representation and the pulse pipeline primitives: resampling,
//! zero-phase band-pass filtering, peak detection, inter-beat intervals and
//! perfusion index.

mod filter;
mod io;
mod peaks;
pub mod spectral;

pub use filter::{bandpass, Sos};
pub use io::{parse_signal_csv, write_signal_csv, SignalTable};
pub use peaks::detect_peaks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled single-channel waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Start time in seconds.
    pub t0: f64,
    pub samples: Vec<f64>,
    pub label: String,
    pub units: String,
}

impl TimeSeries {
    pub fn new(fs: f64, samples: Vec<f64>) -> Result<Self> {
        let ts = Self {
            fs,
            t0: 0.0,
            samples,
            label: String::new(),
            units: String::new(),
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>, units: impl Into<String>) -> Self {
        self.label = label.into();
        self.units = units.into();
        self
    }

    /// Checks the invariants: positive finite rate, at least one sample, every
    /// sample finite.
    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::InsufficientData("time series has no samples".into()));
        }
        if let Some(index) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(len - 1) / fs`.
    pub fn duration_s(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 / self.fs
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.fs
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    /// Same metadata, new samples.
    pub fn map_samples(&self, samples: Vec<f64>) -> TimeSeries {
        TimeSeries {
            fs: self.fs,
            t0: self.t0,
            samples,
            label: self.label.clone(),
            units: self.units.clone(),
        }
    }

    pub fn scaled(&self, k: f64) -> TimeSeries {
        self.map_samples(self.samples.iter().map(|v| v * k).collect())
    }
}

/// Detected pulse peaks. Indices are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
}

impl PeakList {
    pub fn from_indices(ts: &TimeSeries, indices: Vec<usize>) -> Self {
        let times = indices.iter().map(|&i| ts.time_at(i)).collect();
        Self { indices, times }
    }

    /// Peak list from explicit beat times (no backing series).
    pub fn from_times(times: Vec<f64>) -> Self {
        Self {
            indices: (0..times.len()).collect(),
            times,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Inter-beat intervals in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IbiSeries {
    pub intervals_ms: Vec<f64>,
    /// Time of the beat that closes each interval, in seconds.
    pub onset_times: Vec<f64>,
    pub rejected_count: usize,
}

impl IbiSeries {
    /// Ungated series from a list of intervals, first beat at t = 0.
    pub fn from_intervals(intervals_ms: Vec<f64>) -> Self {
        let mut t = 0.0;
        let onset_times = intervals_ms
            .iter()
            .map(|ms| {
                t += ms / 1000.0;
                t
            })
            .collect();
        Self {
            intervals_ms,
            onset_times,
            rejected_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.intervals_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals_ms.is_empty()
    }

    /// Time span covered by the retained intervals, in seconds.
    pub fn duration_s(&self) -> f64 {
        match (self.onset_times.first(), self.onset_times.last()) {
            (Some(first), Some(last)) => last - first + self.intervals_ms[0] / 1000.0,
            _ => 0.0,
        }
    }
}

pub const IBI_MIN_MS: f64 = 300.0;
pub const IBI_MAX_MS: f64 = 2000.0;
const IBI_JUMP_REL: f64 = 0.20;
const IBI_JUMP_ABS_MS: f64 = 200.0;

/// Successive peak-time differences, gated to [300, 2000] ms and against
/// jumps of more than 20 % *and* 200 ms relative to the last retained
/// interval.
pub fn peaks_to_ibi(peaks: &PeakList) -> IbiSeries {
    let mut out = IbiSeries::default();
    if peaks.times.len() < 2 {
        return out;
    }
    let mut last: Option<f64> = None;
    for w in peaks.times.windows(2) {
        let ms = (w[1] - w[0]) * 1000.0;
        let in_range = (IBI_MIN_MS..=IBI_MAX_MS).contains(&ms);
        let jump = last.is_some_and(|prev| {
            let d = (ms - prev).abs();
            d > IBI_JUMP_REL * prev && d > IBI_JUMP_ABS_MS
        });
        if in_range && !jump {
            out.intervals_ms.push(ms);
            out.onset_times.push(w[1]);
            last = Some(ms);
        } else {
            out.rejected_count += 1;
        }
    }
    out
}

/// Linear-interpolation resampling. Equal rates return the input unchanged.
pub fn resample(ts: &TimeSeries, target_fs: f64) -> Result<TimeSeries> {
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target rate must be positive, got {target_fs}"
        )));
    }
    ts.validate()?;
    if target_fs == ts.fs {
        return Ok(ts.clone());
    }
    let n = ts.samples.len();
    let x = &ts.samples;
    let n_out = (ts.duration_s() * target_fs + 1e-9).floor() as usize + 1;
    let ratio = ts.fs / target_fs;
    let samples = (0..n_out)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = pos.floor() as usize;
            if i + 1 >= n {
                x[n - 1]
            } else {
                let frac = pos - i as f64;
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect();
    let mut out = ts.map_samples(samples);
    out.fs = target_fs;
    Ok(out)
}

/// AC/DC ratio. AC is the mean trough-to-peak rise per beat (trough = minimum
/// between consecutive peaks), DC the mean of the raw series.
pub fn perfusion_index(ts: &TimeSeries, peaks: &PeakList) -> Result<f64> {
    ts.validate()?;
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "perfusion index needs at least 2 peaks, got {}",
            peaks.len()
        )));
    }
    let dc = ts.mean();
    if dc <= 0.0 {
        return Err(Error::Domain(format!(
            "PPG baseline must be positive, got mean {dc}"
        )));
    }
    let x = &ts.samples;
    let mut total = 0.0;
    for w in peaks.indices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let trough = x[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        total += x[b] - trough;
    }
    let ac = total / (peaks.len() - 1) as f64;
    Ok(ac.max(0.0) / dc)
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 divisor).
pub(crate) fn sample_var(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(fs: f64, samples: Vec<f64>) -> TimeSeries {
        TimeSeries::new(fs, samples).unwrap()
    }

    #[test]
    fn construction_rejects_non_finite() {
        let err = TimeSeries::new(10.0, vec![1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 1 });
    }

    #[test]
    fn resample_identity_at_equal_rate() {
        let ts = series(125.0, (0..50).map(|i| (i as f64 * 0.3).sin()).collect());
        let out = resample(&ts, 125.0).unwrap();
        assert_eq!(out.samples, ts.samples);
    }

    #[test]
    fn resample_constant() {
        let ts = series(33.0, vec![5.0; 100]);
        for fs in [7.0, 50.0, 100.0, 250.0] {
            let out = resample(&ts, fs).unwrap();
            assert!(out.samples.iter().all(|&v| v == 5.0));
        }
    }

    #[test]
    fn resample_ramp_midpoints() {
        let ts = series(10.0, (0..=10).map(|i| i as f64 / 10.0).collect());
        let out = resample(&ts, 20.0).unwrap();
        assert_eq!(out.len(), 21);
        for k in (1..20).step_by(2) {
            let avg = 0.5 * (out.samples[k - 1] + out.samples[k + 1]);
            assert!((out.samples[k] - avg).abs() < 1e-12);
        }
        assert!((out.duration_s() - ts.duration_s()).abs() <= 1.0 / 20.0);
    }

    #[test]
    fn resample_names_bad_index() {
        let mut ts = series(10.0, vec![0.0; 5]);
        ts.samples[3] = f64::INFINITY;
        assert_eq!(resample(&ts, 20.0).unwrap_err(), Error::NonFinite { index: 3 });
    }

    #[test]
    fn resample_idempotent() {
        let ts = series(125.0, (0..400).map(|i| (i as f64 * 0.05).cos()).collect());
        let once = resample(&ts, 100.0).unwrap();
        let twice = resample(&once, 100.0).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn ibi_uniform_train() {
        let ibi = peaks_to_ibi(&PeakList::from_times(vec![0.0, 1.0, 2.0, 3.0]));
        assert_eq!(ibi.intervals_ms, vec![1000.0, 1000.0, 1000.0]);
        assert_eq!(ibi.rejected_count, 0);
    }

    #[test]
    fn ibi_rejects_short_interval() {
        let ibi = peaks_to_ibi(&PeakList::from_times(vec![0.0, 1.0, 1.1, 2.1]));
        assert_eq!(ibi.rejected_count, 1);
        assert_eq!(ibi.len(), 2);
        assert!(ibi.intervals_ms.iter().all(|&ms| (ms - 1000.0).abs() < 1e-9));
    }

    #[test]
    fn ibi_jump_rule_needs_both_conditions() {
        // 1000 -> 1150: 15 %, 150 ms: kept. 1150 -> 1500: 30 %, 350 ms: rejected.
        let ibi = peaks_to_ibi(&PeakList::from_times(vec![0.0, 1.0, 2.15, 3.65]));
        assert_eq!(ibi.len(), 2);
        assert_eq!(ibi.rejected_count, 1);
        // 400 -> 560: 40 % but only 160 ms: kept.
        let ibi = peaks_to_ibi(&PeakList::from_times(vec![0.0, 0.4, 0.96]));
        assert_eq!(ibi.len(), 2);
    }

    #[test]
    fn ibi_needs_two_peaks() {
        let ibi = peaks_to_ibi(&PeakList::from_times(vec![0.5]));
        assert!(ibi.is_empty());
        assert_eq!(ibi.rejected_count, 0);
    }

    #[test]
    fn perfusion_index_of_sinusoid() {
        let fs = 125.0;
        let x: Vec<f64> = (0..1250)
            .map(|i| 100.0 + 10.0 * (2.0 * PI * i as f64 / fs).sin())
            .collect();
        let ts = series(fs, x);
        let peaks = detect_peaks(&ts, 0.3, 1.0).unwrap();
        let pi = perfusion_index(&ts, &peaks).unwrap();
        assert!((pi - 0.2).abs() < 0.005, "pi = {pi}");
    }

    #[test]
    fn perfusion_index_preconditions() {
        let ts = series(125.0, vec![100.0; 500]);
        let peaks = detect_peaks(&ts, 0.3, 0.1).unwrap();
        assert!(matches!(
            perfusion_index(&ts, &peaks),
            Err(Error::InsufficientData(_))
        ));

        let neg = series(10.0, (0..40).map(|i| -5.0 + (i as f64).sin()).collect());
        let peaks = PeakList::from_indices(&neg, vec![2, 8, 14]);
        assert!(matches!(perfusion_index(&neg, &peaks), Err(Error::Domain(_))));
    }
}
