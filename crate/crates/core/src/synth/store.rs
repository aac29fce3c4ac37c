//! Dataset directory: `manifest.json` plus one `window_NNNNNN.bin` per window.
//!
//! Window file layout, little-endian: magic `NVIW`, u32 version, u32 channel
//! count, u64 samples per channel, u8 label (1 = nvi), f64 intensity, f64
//! nvi_target, then channel-major f64 samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::dataset::{DatasetPlan, LabeledWindow, Split};
use super::trajectory::{Class, NoiseSd, CHANNEL_NAMES, N_CHANNELS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NVIW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub fs: f64,
    pub duration_s: f64,
    pub perturb_onset_s: f64,
    pub max_intensity: f64,
    pub seed: u64,
    pub class_balance: f64,
    pub noise_sd: NoiseSd,
    pub channels: Vec<String>,
    pub split_indices: Split,
    pub labels: Vec<Class>,
    pub nvi_targets: Vec<f64>,
    pub files: Vec<String>,
}

fn window_file(i: usize) -> String {
    format!("window_{i:06}.bin")
}

fn encode(w: &LabeledWindow) -> Vec<u8> {
    let mut b = Vec::with_capacity(37 + 8 * w.channels.len());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(N_CHANNELS as u32).to_le_bytes());
    b.extend_from_slice(&(w.n_samples as u64).to_le_bytes());
    b.push(w.label.is_nvi() as u8);
    b.extend_from_slice(&w.intensity.to_le_bytes());
    b.extend_from_slice(&w.nvi_target.to_le_bytes());
    for v in &w.channels {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

/// Generates every window of `plan` into `dir` and writes the manifest.
pub fn write_dataset(dir: &Path, plan: &DatasetPlan) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let targets = (0..plan.len())
        .into_par_iter()
        .map(|i| {
            let w = plan.window(i)?;
            fs::write(dir.join(window_file(i)), encode(&w))?;
            Ok(w.nvi_target)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = Manifest {
        n: plan.len(),
        fs: plan.cfg.fs,
        duration_s: plan.cfg.duration_s,
        perturb_onset_s: plan.cfg.perturb_onset_s,
        max_intensity: plan.cfg.intensity,
        seed: plan.seed,
        class_balance: plan.class_balance,
        noise_sd: plan.cfg.noise_sd,
        channels: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        split_indices: plan.split.clone(),
        labels: plan.labels.clone(),
        nvi_targets: targets,
        files: (0..plan.len()).map(window_file).collect(),
    };
    let f = fs::File::create(dir.join("manifest.json"))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &m).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(m)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_window(path: &Path) -> Result<LabeledWindow> {
    let bytes = fs::read(path)?;
    let mut r = bytes.as_slice();
    let bad = |m: &str| Error::Parse {
        line: 0,
        message: format!("{}: {m}", path.display()),
    };
    if &take::<4>(&mut r)? != MAGIC {
        return Err(bad("not a window file"));
    }
    if u32::from_le_bytes(take(&mut r)?) != VERSION {
        return Err(bad("unsupported version"));
    }
    let channels = u32::from_le_bytes(take(&mut r)?) as usize;
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    let label = if take::<1>(&mut r)?[0] == 1 { Class::Nvi } else { Class::Stable };
    let intensity = f64::from_le_bytes(take(&mut r)?);
    let nvi_target = f64::from_le_bytes(take(&mut r)?);
    if channels != N_CHANNELS || r.len() != 8 * channels * n {
        return Err(bad("truncated or malformed payload"));
    }
    let data = r
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(LabeledWindow {
        channels: data,
        n_samples: n,
        label,
        nvi_target,
        intensity,
    })
}

/// `t_s,<channel names>` CSV for one window.
pub fn write_window_csv(w: &LabeledWindow, fs: f64) -> String {
    let mut out = String::from("t_s");
    for name in CHANNEL_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..w.n_samples {
        let _ = write!(out, "{}", i as f64 / fs);
        for c in 0..N_CHANNELS {
            let _ = write!(out, ",{}", w.channel(c)[i]);
        }
        out.push('\n');
    }
    out
}

pub fn window_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(window_file(i))
}
