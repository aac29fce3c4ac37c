use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nvi::{composite, ModalityInputs, NviResult};
use crate::rng;
use crate::signal::TimeSeries;

pub const N_CHANNELS: usize = 4;
pub const CHANNEL_NAMES: [&str; N_CHANNELS] = ["spo2_pct", "rmssd_ms", "pi", "phase_delta_deg"];
pub const TAU_ONSET_S: f64 = 5.0;

/// Channel levels in the order of [`CHANNEL_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub spo2_pct: f64,
    pub rmssd_ms: f64,
    pub pi: f64,
    pub phase_delta_deg: f64,
}

impl Setpoints {
    pub fn as_array(&self) -> [f64; N_CHANNELS] {
        [self.spo2_pct, self.rmssd_ms, self.pi, self.phase_delta_deg]
    }

    pub fn from_array(v: [f64; N_CHANNELS]) -> Self {
        Self {
            spo2_pct: v[0],
            rmssd_ms: v[1],
            pi: v[2],
            phase_delta_deg: v[3],
        }
    }

    /// Composite score of these levels; the phase channel is the left-right
    /// difference, so it is passed against a zero reference.
    pub fn score(&self) -> Result<NviResult> {
        composite(&ModalityInputs::all(
            self.spo2_pct.clamp(0.0, 100.0),
            self.rmssd_ms.max(0.0),
            self.pi.max(0.0),
            self.phase_delta_deg,
            0.0,
        ))
    }
}

pub const STABLE: Setpoints = Setpoints {
    spo2_pct: 98.0,
    rmssd_ms: 55.0,
    pi: 0.18,
    phase_delta_deg: 5.0,
};

pub const PERTURBED: Setpoints = Setpoints {
    spo2_pct: 90.0,
    rmssd_ms: 20.0,
    pi: 0.05,
    phase_delta_deg: 60.0,
};

/// Per-channel noise level. Each channel gets a per-trajectory offset and
/// per-sample white noise, both with this standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSd {
    pub spo2_pct: f64,
    pub rmssd_ms: f64,
    pub pi: f64,
    pub phase_delta_deg: f64,
}

impl NoiseSd {
    pub fn as_array(&self) -> [f64; N_CHANNELS] {
        [self.spo2_pct, self.rmssd_ms, self.pi, self.phase_delta_deg]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            spo2_pct: self.spo2_pct * k,
            rmssd_ms: self.rmssd_ms * k,
            pi: self.pi * k,
            phase_delta_deg: self.phase_delta_deg * k,
        }
    }
}

impl Default for NoiseSd {
    fn default() -> Self {
        Self {
            spo2_pct: 1.8,
            rmssd_ms: 15.0,
            pi: 0.04,
            phase_delta_deg: 7.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub duration_s: f64,
    pub fs: f64,
    pub perturb_onset_s: f64,
    pub intensity: f64,
    pub noise_sd: NoiseSd,
    pub seed: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            fs: 100.0,
            perturb_onset_s: 30.0,
            intensity: 1.0,
            noise_sd: NoiseSd::default(),
            seed: 42,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidParameter(format!("fs must be positive, got {}", self.fs)));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(0.0..=self.duration_s).contains(&self.perturb_onset_s) {
            return Err(Error::InvalidParameter(format!(
                "perturb_onset_s {} outside [0, {}]",
                self.perturb_onset_s, self.duration_s
            )));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(Error::InvalidParameter(format!("intensity {} outside [0, 1]", self.intensity)));
        }
        if self.noise_sd.as_array().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter("noise_sd must be finite and non-negative".into()));
        }
        if self.n_samples() < 1 {
            return Err(Error::InvalidParameter("trajectory has no samples".into()));
        }
        Ok(())
    }

    /// Samples per channel, `duration_s * fs`.
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs + 1e-9).floor() as usize
    }

    pub fn onset_index(&self) -> usize {
        ((self.perturb_onset_s * self.fs - 1e-9).ceil().max(0.0) as usize).min(self.n_samples())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Stable,
    Nvi,
}

impl Class {
    pub fn is_nvi(self) -> bool {
        self == Class::Nvi
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Stable => "stable",
            Class::Nvi => "nvi",
        }
    }
}

/// Four aligned channels sampled at `fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub fs: f64,
    pub onset_index: usize,
    /// Channel-major, `N_CHANNELS` rows of equal length.
    pub channels: [Vec<f64>; N_CHANNELS],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self) -> Result<Vec<TimeSeries>> {
        self.channels
            .iter()
            .zip(CHANNEL_NAMES)
            .map(|(c, name)| Ok(TimeSeries::new(self.fs, c.clone())?.with_label(name, "")))
            .collect()
    }

    /// Channel means over `[start, end)`.
    pub fn window_means(&self, start: usize, end: usize) -> Setpoints {
        let end = end.min(self.len());
        let start = start.min(end);
        let n = (end - start).max(1) as f64;
        let mut out = [0.0; N_CHANNELS];
        for (o, c) in out.iter_mut().zip(&self.channels) {
            *o = c[start..end].iter().sum::<f64>() / n;
        }
        Setpoints::from_array(out)
    }

    /// Composite of the post-onset channel means (whole window when the onset
    /// is at the end).
    pub fn post_onset_score(&self) -> Result<f64> {
        let start = if self.onset_index < self.len() { self.onset_index } else { 0 };
        Ok(self.window_means(start, self.len()).score()?.score)
    }

    /// Composite score per block of `block_s` seconds, with block start times.
    pub fn block_scores(&self, block_s: f64) -> Result<Vec<(f64, f64)>> {
        let bl = ((block_s * self.fs).round() as usize).max(1);
        (0..self.len() / bl)
            .map(|b| {
                let s = self.window_means(b * bl, (b + 1) * bl).score()?.score;
                Ok((b as f64 * bl as f64 / self.fs, s))
            })
            .collect()
    }
}

/// Trajectory for `class`, drawn from the stream `(cfg.seed, [trajectory])`.
pub fn gen_trajectory(cfg: &TrajectoryConfig, class: Class) -> Result<Trajectory> {
    let mut rng = rng::stream(cfg.seed, &[rng::DOMAIN_TRAJECTORY]);
    gen_trajectory_with(cfg, class, &mut rng)
}

/// Trajectory from an explicit generator. The class does not change the
/// sequence of draws, so an intensity-0 perturbed trajectory equals the
/// stable one from the same generator state.
pub fn gen_trajectory_with<R: Rng + ?Sized>(cfg: &TrajectoryConfig, class: Class, rng: &mut R) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let onset = cfg.onset_index();
    let stable = STABLE.as_array();
    let perturbed = PERTURBED.as_array();
    let sd = cfg.noise_sd.as_array();
    let gain = if class.is_nvi() { cfg.intensity } else { 0.0 };
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let offsets: [f64; N_CHANNELS] = std::array::from_fn(|c| sd[c] * unit.sample(rng));
    let channels: [Vec<f64>; N_CHANNELS] = std::array::from_fn(|c| {
        (0..n)
            .map(|i| {
                let lag = if i >= onset {
                    let dt = (i - onset) as f64 / cfg.fs;
                    1.0 - (-dt / TAU_ONSET_S).exp()
                } else {
                    0.0
                };
                let level = stable[c] + gain * (perturbed[c] - stable[c]) * lag;
                let v = level + offsets[c] + sd[c] * unit.sample(rng);
                match c {
                    0 => v.clamp(0.0, 100.0),
                    1 | 2 => v.max(0.0),
                    _ => v,
                }
            })
            .collect()
    });
    Ok(Trajectory {
        fs: cfg.fs,
        onset_index: onset,
        channels,
    })
}
