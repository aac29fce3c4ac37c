//! Neurovascular instability (NVI) scoring toolkit.
//!
//! Signal conditioning, heart-rate variability, PPG feature extraction, the
//! composite NVI score, synthetic data generation, evaluation statistics and a
//! parametric skin-conductivity model.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biosense;
pub mod error;
pub mod hrv;
pub mod morphology;
pub mod nvi;
pub mod rng;
pub mod signal;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
