use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{gen_trajectory_with, Class, TrajectoryConfig, N_CHANNELS};
use crate::error::{Error, Result};
use crate::rng;

pub const TRAIN_FRACTION: f64 = 0.70;
pub const VAL_FRACTION: f64 = 0.15;
pub const MIN_WINDOWS: usize = 10;

/// One labelled 4-channel window.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    /// Row-major `N_CHANNELS x T`.
    pub channels: Vec<f64>,
    pub n_samples: usize,
    pub label: Class,
    pub nvi_target: f64,
    pub intensity: f64,
}

impl LabeledWindow {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c * self.n_samples..(c + 1) * self.n_samples]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/val/test sizes: floor of each fraction, remainder to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * TRAIN_FRACTION + 1e-9).floor() as usize;
    let val = (n as f64 * VAL_FRACTION + 1e-9).floor() as usize;
    (train, val, n - train - val)
}

/// Labels, per-window intensities and the split. Windows are generated on
/// demand from `(seed, [dataset, index])`, so a plan is cheap to hold for
/// large `n` and any window can be regenerated independently.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub cfg: TrajectoryConfig,
    pub seed: u64,
    pub class_balance: f64,
    pub labels: Vec<Class>,
    pub split: Split,
}

impl DatasetPlan {
    pub fn new(n: usize, class_balance: f64, cfg: &TrajectoryConfig, seed: u64) -> Result<Self> {
        if n < MIN_WINDOWS {
            return Err(Error::InvalidParameter(format!("dataset needs n >= {MIN_WINDOWS}, got {n}")));
        }
        if !(0.0..=1.0).contains(&class_balance) {
            return Err(Error::InvalidParameter(format!("class_balance {class_balance} outside [0, 1]")));
        }
        cfg.validate()?;
        let n_nvi = (n as f64 * class_balance).round() as usize;
        let mut labels: Vec<Class> = (0..n).map(|i| if i < n_nvi { Class::Nvi } else { Class::Stable }).collect();
        labels.shuffle(&mut rng::stream(seed, &[rng::DOMAIN_DATASET, u64::MAX]));
        let split = stratified_split(&labels);
        Ok(Self {
            cfg: *cfg,
            seed,
            class_balance,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window(&self, i: usize) -> Result<LabeledWindow> {
        let mut rng = rng::stream(self.seed, &[rng::DOMAIN_DATASET, i as u64]);
        // drawn for every window so the class never shifts the stream
        let u: f64 = rng.random();
        let label = self.labels[i];
        let intensity = if label.is_nvi() { u * self.cfg.intensity } else { 0.0 };
        let cfg = TrajectoryConfig { intensity, ..self.cfg };
        let traj = gen_trajectory_with(&cfg, label, &mut rng)?;
        let nvi_target = traj.post_onset_score()?;
        let n_samples = traj.len();
        let mut channels = Vec::with_capacity(N_CHANNELS * n_samples);
        for c in &traj.channels {
            channels.extend_from_slice(c);
        }
        Ok(LabeledWindow {
            channels,
            n_samples,
            label,
            nvi_target,
            intensity,
        })
    }

    /// `nvi_target` of every window, without keeping the channels.
    pub fn targets(&self) -> Result<Vec<f64>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.window(i).map(|w| w.nvi_target))
            .collect()
    }

    pub fn label_flags(&self) -> Vec<bool> {
        self.labels.iter().map(|c| c.is_nvi()).collect()
    }
}

/// Interleave the two classes by within-class quantile, then cut into
/// consecutive train/val/test blocks.
fn stratified_split(labels: &[Class]) -> Split {
    let n = labels.len();
    let mut keyed: Vec<(f64, u8, usize)> = Vec::with_capacity(n);
    for class in [Class::Stable, Class::Nvi] {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        let m = members.len() as f64;
        for (rank, &i) in members.iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / m, class.is_nvi() as u8, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let order: Vec<usize> = keyed.into_iter().map(|k| k.2).collect();
    let (tr, va, _) = split_sizes(n);
    Split {
        train: order[..tr].to_vec(),
        val: order[tr..tr + va].to_vec(),
        test: order[tr + va..].to_vec(),
    }
}

/// A materialised dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub plan: DatasetPlan,
    pub windows: Vec<LabeledWindow>,
}

pub fn gen_dataset(n: usize, class_balance: f64, cfg: &TrajectoryConfig, seed: u64) -> Result<Dataset> {
    let plan = DatasetPlan::new(n, class_balance, cfg, seed)?;
    let windows = (0..n)
        .into_par_iter()
        .map(|i| plan.window(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { plan, windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::roc_auc;
    use crate::synth::NoiseSd;

    fn small_cfg() -> TrajectoryConfig {
        TrajectoryConfig {
            duration_s: 10.0,
            fs: 20.0,
            perturb_onset_s: 5.0,
            ..Default::default()
        }
    }

    #[test]
    fn ten_windows_split() {
        let ds = gen_dataset(10, 0.5, &small_cfg(), 7).unwrap();
        let nvi = ds.windows.iter().filter(|w| w.label.is_nvi()).count();
        assert_eq!(nvi, 5);
        let s = &ds.plan.split;
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_sizes(10), (7, 1, 2));
        assert_eq!(split_sizes(2000), (1400, 300, 300));
        assert_eq!(split_sizes(10_000), (7000, 1500, 1500));
        assert_eq!(split_sizes(11), (7, 1, 3));
    }

    #[test]
    fn split_is_stratified() {
        let plan = DatasetPlan::new(1000, 0.5, &small_cfg(), 1).unwrap();
        let pos = |idx: &[usize]| idx.iter().filter(|&&i| plan.labels[i].is_nvi()).count();
        assert!((pos(&plan.split.train) as i64 - 350).abs() <= 1);
        assert!((pos(&plan.split.val) as i64 - 75).abs() <= 1);
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = gen_dataset(20, 0.5, &small_cfg(), 3).unwrap();
        let b = gen_dataset(20, 0.5, &small_cfg(), 3).unwrap();
        assert_eq!(a, b);
        let c = DatasetPlan::new(20, 0.5, &small_cfg(), 4).unwrap();
        assert_ne!(a.plan.labels, c.labels);
    }

    #[test]
    fn window_shape_and_target() {
        let ds = gen_dataset(12, 0.5, &small_cfg(), 9).unwrap();
        for w in &ds.windows {
            assert_eq!(w.n_samples, 200);
            assert_eq!(w.channels.len(), 4 * 200);
            assert!((0.0..=100.0).contains(&w.nvi_target));
            let n = w.n_samples;
            let mean = |c: usize| w.channel(c)[100..n].iter().sum::<f64>() / 100.0;
            let inputs = crate::nvi::ModalityInputs::all(mean(0), mean(1), mean(2), mean(3), 0.0);
            let s = crate::nvi::composite(&inputs).unwrap().score;
            assert!((s - w.nvi_target).abs() <= 1.0);
            if !w.label.is_nvi() {
                assert_eq!(w.intensity, 0.0);
            }
        }
    }

    #[test]
    fn auc_increases_as_noise_decreases() {
        for seed in 0..5 {
            let mut aucs = Vec::new();
            for k in [2.0, 1.0, 0.5] {
                let cfg = TrajectoryConfig {
                    noise_sd: NoiseSd::default().scaled(k),
                    ..small_cfg()
                };
                let plan = DatasetPlan::new(400, 0.5, &cfg, seed).unwrap();
                let risk: Vec<f64> = plan.targets().unwrap().iter().map(|t| -t).collect();
                aucs.push(roc_auc(&risk, &plan.label_flags()).unwrap());
            }
            assert!(aucs[0] < aucs[1] && aucs[1] < aucs[2], "seed {seed}: {aucs:?}");
        }
    }
}
