//! Synthetic data: four-channel physiological trajectories with a perturbation
//! onset, labelled window datasets with a stratified split, Monte-Carlo
//! perturbation and recovery dynamics, and co-generated ECG/PPG waveforms with
//! known beat times.
//!
//! Channel setpoints are calibration values, not physiological ground truth.
//! Every generator draws from [`crate::rng::stream`], so a seed and key path
//! determine the output exactly.

mod dataset;
mod dynamics;
mod store;
mod trajectory;
mod waveform;

pub use dataset::{gen_dataset, split_sizes, Dataset, DatasetPlan, LabeledWindow, Split};
pub use dynamics::{fit_recovery, mc_perturbation, recovery_curve, McSummary, RecoveryFit, DEFAULT_MC_RUNS, RECOVERY_TAU_S};
pub use store::{read_manifest, read_window, window_path, write_dataset, write_window_csv, Manifest};
pub use trajectory::{
    gen_trajectory, gen_trajectory_with, Class, NoiseSd, Setpoints, Trajectory, TrajectoryConfig, CHANNEL_NAMES,
    N_CHANNELS, PERTURBED, STABLE, TAU_ONSET_S,
};
pub use waveform::{gen_cardiac_recording, CardiacParams, CardiacRecording};
