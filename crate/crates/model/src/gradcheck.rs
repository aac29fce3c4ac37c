//! Backpropagation checked against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tape::{LossMix, Tape};
use crate::tensor::Mat;
use crate::transformer::{Mode, Model, ModelConfig};

pub const EPS: f64 = 1e-3;
const BATCH: usize = 3;
const TARGETS: [f64; BATCH] = [35.0, 80.0, 62.0];
const LABELS: [f64; BATCH] = [1.0, 0.0, 1.0];
const POS_WEIGHT: f64 = 1.7;
/// Random offset added to every parameter so no path sits at its
/// zero/unit initialisation.
const JITTER: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    /// `|a - n| / max(|a|, |n|, 1e-6)`
    pub worst_rel_error: f64,
    pub worst_at: String,
}

/// Small dropout-free configuration cheap enough to check every scalar.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        in_channels: 4,
        d_model: 8,
        heads: 2,
        layers: 1,
        ffn_dim: 16,
        dropout: 0.0,
        seq_len: 4,
        patch: 1,
    }
}

fn loss(model: &Model, x: &Mat) -> Result<(f64, Vec<Option<Mat>>)> {
    let mut tape = Tape::new();
    let g = model.build(&mut tape, x.clone(), Mode::Train, None)?;
    let l = tape.loss(g.logits, &TARGETS, &LABELS, POS_WEIGHT, LossMix::default())?;
    let grads = tape.backward(l, model.params.len())?;
    Ok((tape.value(l).data[0], grads))
}

/// Compares every analytic parameter gradient of the combined loss with the
/// five-point central difference of step [`EPS`] (fourth-order accurate; the
/// three-point rule leaves ~1e-4 relative truncation error on gradients near
/// 1e-6). Dropout must be zero in `cfg`.
#[allow(clippy::needless_range_loop)]
pub fn gradient_check(cfg: ModelConfig, seed: u64) -> Result<GradCheck> {
    let mut model = Model::new(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for p in &mut model.params {
        for v in &mut p.data {
            *v += rng.random_range(-JITTER..JITTER);
        }
    }
    let n = BATCH * cfg.seq_len * cfg.in_channels;
    let x = Mat::from_vec(
        BATCH * cfg.seq_len,
        cfg.in_channels,
        (0..n).map(|_| rng.random_range(-1.5..1.5)).collect(),
    );
    let (_, grads) = loss(&model, &x)?;
    let mut out = GradCheck {
        checked: 0,
        worst_rel_error: 0.0,
        worst_at: String::new(),
    };
    for pi in 0..model.params.len() {
        let analytic = grads[pi].clone().unwrap_or_else(|| Mat::zeros(model.params[pi].rows, model.params[pi].cols));
        for j in 0..model.params[pi].len() {
            let orig = model.params[pi].data[j];
            let mut at = |k: f64| -> Result<f64> {
                model.params[pi].data[j] = orig + k * EPS;
                Ok(loss(&model, &x)?.0)
            };
            let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
            model.params[pi].data[j] = orig;
            let numeric = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * EPS);
            let a = analytic.data[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > out.worst_rel_error {
                out.worst_rel_error = rel;
                out.worst_at = format!("{}[{j}] analytic {a:e} numeric {numeric:e}", model.names[pi]);
            }
            out.checked += 1;
        }
    }
    Ok(out)
}
