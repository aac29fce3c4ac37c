use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hrv;
use crate::rng;
use crate::signal::{IbiSeries, TimeSeries};

const AR_COEF: f64 = 0.5;
const IBI_RANGE_MS: (f64, f64) = (400.0, 1500.0);
const FIRST_BEAT_S: f64 = 0.3;

/// Subject-level parameters for a co-generated ECG/PPG recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardiacParams {
    pub hr_bpm: f64,
    /// Target RMSSD of the beat-interval process.
    pub rmssd_ms: f64,
    /// Respiratory sinus arrhythmia amplitude.
    pub rsa_ms: f64,
    pub resp_hz: f64,
    /// R-peak to pulse-foot delay.
    pub ptt_ms: f64,
    pub ptt_jitter_ms: f64,
    pub ppg_dc: f64,
    pub ppg_ac: f64,
    pub ppg_noise_sd: f64,
    pub ecg_noise_sd: f64,
}

impl Default for CardiacParams {
    fn default() -> Self {
        Self {
            hr_bpm: 70.0,
            rmssd_ms: 40.0,
            rsa_ms: 15.0,
            resp_hz: 0.25,
            ptt_ms: 200.0,
            ptt_jitter_ms: 2.0,
            ppg_dc: 2.0,
            ppg_ac: 0.2,
            ppg_noise_sd: 0.005,
            ecg_noise_sd: 0.01,
        }
    }
}

/// ECG and PPG with the generating beat sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CardiacRecording {
    pub ecg: TimeSeries,
    pub ppg: TimeSeries,
    pub r_peak_times: Vec<f64>,
    pub ibi_ms: Vec<f64>,
    pub true_rmssd_ms: f64,
    pub true_sdnn_ms: f64,
}

fn gauss(t: f64, c: f64, w: f64) -> f64 {
    (-0.5 * ((t - c) / w).powi(2)).exp()
}

/// ECG waveform components: (offset s, amplitude, width s).
const ECG_WAVES: [(f64, f64, f64); 5] = [
    (-0.16, 0.10, 0.025),
    (-0.025, -0.10, 0.010),
    (0.0, 1.00, 0.012),
    (0.025, -0.20, 0.010),
    (0.25, 0.30, 0.050),
];

/// PPG pulse relative to its foot: systolic and diastolic waves.
const PPG_WAVES: [(f64, f64, f64); 2] = [(0.12, 1.0, 0.07), (0.36, 0.40, 0.09)];

/// Beat intervals from an AR(1) process plus respiratory modulation; ECG and
/// PPG synthesised from Gaussian wave templates at the resulting beat times.
pub fn gen_cardiac_recording(params: &CardiacParams, duration_s: f64, fs: f64, seed: u64) -> Result<CardiacRecording> {
    if !(duration_s > 0.0 && fs > 0.0 && duration_s.is_finite() && fs.is_finite()) {
        return Err(Error::InvalidParameter("duration and fs must be positive".into()));
    }
    if !(params.hr_bpm > 0.0 && params.rmssd_ms >= 0.0) {
        return Err(Error::InvalidParameter("hr must be positive and rmssd non-negative".into()));
    }
    let mut rng = rng::stream(seed, &[rng::DOMAIN_WAVEFORM]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mean_ibi = 60_000.0 / params.hr_bpm;
    let innov = params.rmssd_ms * ((1.0 + AR_COEF) / 2.0).sqrt();
    let sd_x = innov / (1.0 - AR_COEF * AR_COEF).sqrt();
    let mut x = sd_x * unit.sample(&mut rng);
    let phase0 = rng.random::<f64>() * 2.0 * PI;

    let mut r_times = vec![FIRST_BEAT_S];
    let mut ibi = Vec::new();
    while *r_times.last().unwrap() < duration_s + 1.0 {
        let t = *r_times.last().unwrap();
        x = AR_COEF * x + innov * unit.sample(&mut rng);
        let rsa = params.rsa_ms * (2.0 * PI * params.resp_hz * t + phase0).sin();
        let i = (mean_ibi + x + rsa).clamp(IBI_RANGE_MS.0, IBI_RANGE_MS.1);
        ibi.push(i);
        r_times.push(t + i / 1000.0);
    }
    let feet: Vec<f64> = r_times
        .iter()
        .map(|t| t + (params.ptt_ms + params.ptt_jitter_ms * unit.sample(&mut rng)) / 1000.0)
        .collect();

    let n = (duration_s * fs + 1e-9).floor() as usize;
    let mut ecg = vec![0.0; n];
    let mut ppg = vec![0.0; n];
    let mut lo_r = 0;
    let mut lo_f = 0;
    for i in 0..n {
        let t = i as f64 / fs;
        while lo_r < r_times.len() && r_times[lo_r] < t - 0.6 {
            lo_r += 1;
        }
        while lo_f < feet.len() && feet[lo_f] < t - 1.0 {
            lo_f += 1;
        }
        let mut e = 0.0;
        for &r in r_times[lo_r..].iter().take_while(|&&r| r < t + 0.3) {
            e += ECG_WAVES.iter().map(|&(o, a, w)| a * gauss(t, r + o, w)).sum::<f64>();
        }
        let mut p = 0.0;
        for &f in feet[lo_f..].iter().take_while(|&&f| f < t + 0.1) {
            p += PPG_WAVES.iter().map(|&(o, a, w)| a * gauss(t, f + o, w)).sum::<f64>();
        }
        ecg[i] = e + params.ecg_noise_sd * unit.sample(&mut rng);
        ppg[i] = params.ppg_dc
            + params.ppg_ac * p
            + 0.02 * params.ppg_ac * (2.0 * PI * params.resp_hz * t + phase0).sin()
            + params.ppg_noise_sd * unit.sample(&mut rng);
    }

    // ground truth over beats that fall inside the record
    let inside: Vec<f64> = r_times
        .windows(2)
        .zip(&ibi)
        .filter(|(w, _)| w[1] <= duration_s)
        .map(|(_, i)| *i)
        .collect();
    let truth = IbiSeries::from_intervals(inside);
    Ok(CardiacRecording {
        ecg: TimeSeries::new(fs, ecg)?.with_label("ecg", "mV"),
        ppg: TimeSeries::new(fs, ppg)?.with_label("ppg", "au"),
        r_peak_times: r_times.into_iter().filter(|t| *t <= duration_s).collect(),
        true_rmssd_ms: hrv::rmssd(&truth)?,
        true_sdnn_ms: hrv::sdnn(&truth)?,
        ibi_ms: truth.intervals_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrv::prv_from_ppg;

    #[test]
    fn deterministic() {
        let p = CardiacParams::default();
        let a = gen_cardiac_recording(&p, 20.0, 100.0, 5).unwrap();
        let b = gen_cardiac_recording(&p, 20.0, 100.0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interval_process_hits_target_rmssd() {
        let p = CardiacParams {
            rsa_ms: 0.0,
            rmssd_ms: 50.0,
            ..Default::default()
        };
        let r = gen_cardiac_recording(&p, 600.0, 50.0, 11).unwrap();
        assert!((r.true_rmssd_ms - 50.0).abs() < 5.0, "{}", r.true_rmssd_ms);
        let mean = r.ibi_ms.iter().sum::<f64>() / r.ibi_ms.len() as f64;
        assert!((mean - 60_000.0 / 70.0).abs() < 10.0);
    }

    #[test]
    fn ppg_pipeline_tracks_truth() {
        let p = CardiacParams::default();
        let r = gen_cardiac_recording(&p, 120.0, 125.0, 3).unwrap();
        let m = prv_from_ppg(&r.ppg).unwrap();
        assert!((m.rmssd_ms - r.true_rmssd_ms).abs() < 8.0, "{} vs {}", m.rmssd_ms, r.true_rmssd_ms);
    }
}
