//! Time- and frequency-domain heart rate (and pulse rate) variability.
//!
//! Spectral bands follow the usual short-term conventions: LF 0.04-0.15 Hz,
//! HF 0.15-0.40 Hz. The tachogram is linearly interpolated to 4 Hz before the
//! Welch estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{self, spectral, IbiSeries, PeakList, TimeSeries};

pub const LF_BAND: (f64, f64) = (0.04, 0.15);
pub const HF_BAND: (f64, f64) = (0.15, 0.40);
pub const TACHOGRAM_FS: f64 = 4.0;
pub const WELCH_SEGMENT_S: f64 = 120.0;
/// Minimum covered duration for RMSSD/SDNN to be flagged valid.
pub const MIN_VALID_DURATION_S: f64 = 30.0;
/// Minimum recording length accepted by [`prv_from_ppg`].
pub const MIN_PRV_DURATION_S: f64 = 60.0;
const MIN_TACHOGRAM_SAMPLES: usize = 16;
/// Band powers below this are treated as zero for the ratio.
const ZERO_POWER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrvMetrics {
    pub rmssd_ms: f64,
    pub sdnn_ms: f64,
    pub lf_power_ms2: Option<f64>,
    pub hf_power_ms2: Option<f64>,
    pub lf_hf: Option<f64>,
    pub n_intervals: usize,
    pub duration_s: f64,
    /// Covered duration reached [`MIN_VALID_DURATION_S`].
    pub valid: bool,
    /// HF power was zero (ratio reported as +inf) or the record was shorter
    /// than one Welch segment.
    pub spectral_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfHf {
    pub lf_power: f64,
    pub hf_power: f64,
    pub ratio: f64,
    pub warning: bool,
}

fn require_two(ibi: &IbiSeries, what: &str) -> Result<()> {
    if ibi.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least 2 intervals, got {}",
            ibi.len()
        )));
    }
    Ok(())
}

/// Root mean square of successive differences, ms.
pub fn rmssd(ibi: &IbiSeries) -> Result<f64> {
    require_two(ibi, "RMSSD")?;
    let x = &ibi.intervals_ms;
    let ss: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((ss / (x.len() - 1) as f64).sqrt())
}

/// Sample standard deviation of the intervals, ms.
pub fn sdnn(ibi: &IbiSeries) -> Result<f64> {
    require_two(ibi, "SDNN")?;
    Ok(signal::sample_var(&ibi.intervals_ms).sqrt())
}

/// Interpolates the tachogram onto a uniform grid.
pub fn tachogram(ibi: &IbiSeries, fs: f64) -> Result<Vec<f64>> {
    require_two(ibi, "tachogram")?;
    let t = &ibi.onset_times;
    let v = &ibi.intervals_ms;
    let span = t[t.len() - 1] - t[0];
    let n = (span * fs + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let tk = t[0] + k as f64 / fs;
        while j + 2 < t.len() && t[j + 1] < tk {
            j += 1;
        }
        let (ta, tb) = (t[j], t[j + 1]);
        let frac = ((tk - ta) / (tb - ta)).clamp(0.0, 1.0);
        out.push(v[j] + frac * (v[j + 1] - v[j]));
    }
    Ok(out)
}

pub fn lf_hf(ibi: &IbiSeries) -> Result<LfHf> {
    let mut tach = tachogram(ibi, TACHOGRAM_FS)?;
    if tach.len() < MIN_TACHOGRAM_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "tachogram spans {} samples, need {MIN_TACHOGRAM_SAMPLES}",
            tach.len()
        )));
    }
    let m = signal::mean(&tach);
    tach.iter_mut().for_each(|v| *v -= m);
    let nperseg = (WELCH_SEGMENT_S * TACHOGRAM_FS) as usize;
    let psd = spectral::welch(&tach, TACHOGRAM_FS, nperseg)?;
    let lf = psd.band_power(LF_BAND.0, LF_BAND.1);
    let hf = psd.band_power(HF_BAND.0, HF_BAND.1);
    let short = tach.len() < nperseg;
    Ok(if hf <= ZERO_POWER {
        LfHf {
            lf_power: lf,
            hf_power: hf,
            ratio: f64::INFINITY,
            warning: true,
        }
    } else {
        LfHf {
            lf_power: lf,
            hf_power: hf,
            ratio: lf / hf,
            warning: short,
        }
    })
}

pub fn hrv_metrics(ibi: &IbiSeries) -> Result<HrvMetrics> {
    let rmssd_ms = rmssd(ibi)?;
    let sdnn_ms = sdnn(ibi)?;
    let duration_s = ibi.duration_s();
    let spectral = lf_hf(ibi).ok();
    Ok(HrvMetrics {
        rmssd_ms,
        sdnn_ms,
        lf_power_ms2: spectral.map(|s| s.lf_power),
        hf_power_ms2: spectral.map(|s| s.hf_power),
        lf_hf: spectral.map(|s| s.ratio),
        n_intervals: ibi.len(),
        duration_s,
        valid: duration_s >= MIN_VALID_DURATION_S,
        spectral_warning: spectral.is_none_or(|s| s.warning),
    })
}

/// Parameters of the pulse pipeline shared by PRV and the feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub min_distance_s: f64,
    /// Minimum peak prominence as a fraction of the 5-95 percentile range of
    /// the filtered signal.
    pub rel_prominence: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            band_lo_hz: 0.5,
            band_hi_hz: 12.0,
            min_distance_s: 0.3,
            rel_prominence: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PulseAnalysis {
    pub filtered: TimeSeries,
    pub peaks: PeakList,
    pub ibi: IbiSeries,
}

fn percentile_range(x: &[f64], lo: f64, hi: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let at = |q: f64| s[((s.len() - 1) as f64 * q).round() as usize];
    at(hi) - at(lo)
}

/// band-pass -> peaks -> gated intervals.
pub fn analyze_pulse(ppg: &TimeSeries, params: &PulseParams) -> Result<PulseAnalysis> {
    let filtered = signal::bandpass(ppg, params.band_lo_hz, params.band_hi_hz)?;
    let prominence = params.rel_prominence * percentile_range(&filtered.samples, 0.05, 0.95);
    let peaks = signal::detect_peaks(&filtered, params.min_distance_s, prominence)?;
    let ibi = signal::peaks_to_ibi(&peaks);
    Ok(PulseAnalysis {
        filtered,
        peaks,
        ibi,
    })
}

/// Pulse rate variability from a PPG record of at least 60 s.
pub fn prv_from_ppg(ppg: &TimeSeries) -> Result<HrvMetrics> {
    if ppg.duration_s() < MIN_PRV_DURATION_S {
        return Err(Error::InsufficientData(format!(
            "PRV needs {MIN_PRV_DURATION_S} s of PPG, got {:.1} s",
            ppg.duration_s()
        )));
    }
    let analysis = analyze_pulse(ppg, &PulseParams::default())?;
    hrv_metrics(&analysis.ibi)
}
