//! Welch power spectral density.

use rustfft::{num_complex::Complex64, FftPlanner};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One-sided PSD in units²/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Rectangle-rule integral of the density over `lo <= f < hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.df();
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.df()
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch's method: Hann-windowed segments of `nperseg` samples (clamped to the
/// input length) with 50 % overlap, each segment mean-detrended, averaged
/// periodograms with density scaling.
pub fn welch(x: &[f64], fs: f64, nperseg: usize) -> Result<Psd> {
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "Welch PSD needs at least 2 samples".into(),
        ));
    }
    if !(fs > 0.0) || nperseg < 2 {
        return Err(Error::InvalidParameter(format!(
            "welch: fs={fs}, nperseg={nperseg}"
        )));
    }
    let nseg = nperseg.min(x.len());
    let step = (nseg - nseg / 2).max(1);
    let window = hann(nseg);
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nseg);
    let nfreq = nseg / 2 + 1;
    let mut acc = vec![0.0; nfreq];
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    let mut count = 0usize;
    let mut start = 0;
    while start + nseg <= x.len() {
        let seg = &x[start..start + nseg];
        let m = seg.iter().sum::<f64>() / nseg as f64;
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - m) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wss * count as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (nseg.is_multiple_of(2) && k == nseg / 2) {
                1.0
            } else {
                2.0
            };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..nfreq).map(|k| k as f64 * fs / nseg as f64).collect();
    Ok(Psd { freqs, density })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parseval_for_white_sequence() {
        // Deterministic pseudo-noise; the integral of the PSD approximates the variance.
        let mut state = 12345u64;
        let x: Vec<f64> = (0..8192)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        let psd = welch(&x, 10.0, 256).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((psd.total_power() / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn tone_lands_in_its_bin() {
        let fs = 4.0;
        let x: Vec<f64> = (0..1200)
            .map(|i| (2.0 * PI * 0.25 * i as f64 / fs).sin())
            .collect();
        let psd = welch(&x, fs, 480).unwrap();
        let k = psd
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((psd.freqs[k] - 0.25).abs() < 1e-12);
        // Sine power 0.5 is recovered by the band integral.
        assert!((psd.band_power(0.2, 0.3) - 0.5).abs() < 0.01);
    }
}
