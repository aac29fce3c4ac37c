//! Butterworth band-pass design (bilinear transform with pre-warping) and
//! forward-backward application over second-order sections.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::TimeSeries;
use crate::error::{Error, Result};

pub const BANDPASS_ORDER: usize = 4;

/// Cascade of biquads, each `[b0, b1, b2, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 5]>,
}

impl Sos {
    /// Band-pass of prototype order `order` (the digital filter has
    /// `2 * order` poles).
    pub fn butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "band-pass order must be even and positive, got {order}"
            )));
        }
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "band edges must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if hi >= fs / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "upper edge {hi} Hz must be below Nyquist ({} Hz)",
                fs / 2.0
            )));
        }
        let k = 2.0 * fs;
        let wl = k * (PI * lo / fs).tan();
        let wh = k * (PI * hi / fs).tan();
        let w0 = (wl * wh).sqrt();
        let bw = wh - wl;

        let mut sections = Vec::with_capacity(order);
        for i in 0..order {
            let theta = PI * (2 * i + 1 + order) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let half = p * (bw / 2.0);
            let disc = (half * half - w0 * w0).sqrt();
            for s in [half + disc, half - disc] {
                if s.im <= 0.0 {
                    continue;
                }
                let z = (k + s) / (k - s);
                // zeros at z = +1 and z = -1
                sections.push([1.0, 0.0, -1.0, -2.0 * z.re, z.norm_sqr()]);
            }
        }
        debug_assert_eq!(sections.len(), order);

        let wc = 2.0 * (w0 / k).atan();
        let mut sos = Sos { sections };
        let gain = sos.response(wc).norm();
        let per = gain.powf(-1.0 / sos.sections.len() as f64);
        for s in &mut sos.sections {
            s[0] *= per;
            s[1] *= per;
            s[2] *= per;
        }
        Ok(sos)
    }

    /// Complex response at digital angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s[0] + z1 * s[1] + z2 * s[2];
            let den = 1.0 + z1 * s[3] + z2 * s[4];
            acc * num / den
        })
    }

    /// Steady-state transposed direct form II state for a unit step.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut level = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = (s[0] + s[1] + s[2]) / (1.0 + s[3] + s[4]);
                let y = g * level;
                let z2 = s[2] * level - s[4] * y;
                let z1 = s[1] * level - s[3] * y + z2;
                level = y;
                [z1, z2]
            })
            .collect()
    }

    fn filter_in_place(&self, x: &mut [f64], zi: &[[f64; 2]], x0: f64) {
        for (s, z) in self.sections.iter().zip(zi) {
            let (mut z1, mut z2) = (z[0] * x0, z[1] * x0);
            for v in x.iter_mut() {
                let input = *v;
                let y = s[0] * input + z1;
                z1 = s[1] * input - s[3] * y + z2;
                z2 = s[2] * input - s[4] * y;
                *v = y;
            }
        }
    }

    /// Zero-phase forward-backward filtering with odd extension at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = (3 * (2 * self.sections.len() + 1)).min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let first = ext[0];
        self.filter_in_place(&mut ext, &zi, first);
        ext.reverse();
        let first = ext[0];
        self.filter_in_place(&mut ext, &zi, first);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase 4th-order Butterworth band-pass.
pub fn bandpass(ts: &TimeSeries, lo: f64, hi: f64) -> Result<TimeSeries> {
    ts.validate()?;
    let sos = Sos::butter_bandpass(BANDPASS_ORDER, lo, hi, ts.fs)?;
    let needed = 3 * BANDPASS_ORDER;
    if ts.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: ts.len(),
        });
    }
    Ok(ts.map_samples(sos.filtfilt(&ts.samples)))
}
