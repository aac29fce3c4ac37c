//! AdamW with decoupled weight decay and the cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::tensor::Mat;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// `eta_min + (lr - eta_min) * (1 + cos(pi * e / t_max)) / 2`, with the epoch
/// clamped to `[0, t_max]`.
pub fn cosine_lr(lr: f64, eta_min: f64, t_max: usize, epoch: usize) -> f64 {
    if t_max == 0 {
        return lr;
    }
    let e = epoch.min(t_max) as f64;
    eta_min + 0.5 * (lr - eta_min) * (1.0 + (std::f64::consts::PI * e / t_max as f64).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl AdamState {
    pub fn new(params: &[Mat]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| Mat::zeros(p.rows, p.cols)).collect(),
            v: params.iter().map(|p| Mat::zeros(p.rows, p.cols)).collect(),
        }
    }
}

/// One AdamW update. Parameters without a gradient still decay.
pub fn adamw_step(params: &mut [Mat], grads: &[Option<Mat>], state: &mut AdamState, lr: f64, weight_decay: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let decay = 1.0 - lr * weight_decay;
        let Some(g) = &grads[i] else {
            p.data.iter_mut().for_each(|w| *w *= decay);
            continue;
        };
        let (m, v) = (&mut state.m[i].data, &mut state.v[i].data);
        for j in 0..p.data.len() {
            let gj = g.data[j];
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * gj;
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * gj * gj;
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            p.data[j] = p.data[j] * decay - lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
}
