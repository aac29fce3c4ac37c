//! Pre-norm transformer encoder over patch tokens with a learned positional
//! table, mean pooling and a two-layer scoring head.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, ModelError, Result};
use crate::tape::{sigmoid, NodeId, Tape};
use crate::tensor::Mat;
use nvi_core::rng;

pub const HEAD_HIDDEN: usize = 32;
const POS_INIT_SD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    /// Tokens per window.
    pub seq_len: usize,
    /// Samples averaged into one token.
    pub patch: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 4,
            d_model: 128,
            heads: 4,
            layers: 2,
            ffn_dim: 256,
            dropout: 0.15,
            seq_len: 60,
            patch: 100,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.in_channels == 0 || self.d_model == 0 || self.heads == 0 || self.seq_len == 0 || self.patch == 0 {
            return bad("dimensions must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return bad(format!("d_model {} not divisible by heads {}", self.d_model, self.heads));
        }
        if self.layers > 0 && self.ffn_dim == 0 {
            return bad("ffn_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }

    /// Samples per channel in one input window.
    pub fn window_len(&self) -> usize {
        self.seq_len * self.patch
    }
}

/// Trainable scalars:
/// `C*d + d` (input projection) + `2d` (input norm) + `T*d` (positions)
/// + `L * (2d + 3d^2 + 3d + d^2 + d + 2d + 2dF + F + d)` (encoder layers)
/// + `d*32 + 32 + 32 + 1` (head).
pub fn param_count(cfg: &ModelConfig) -> usize {
    let (c, d, t, l, f, h) = (cfg.in_channels, cfg.d_model, cfg.seq_len, cfg.layers, cfg.ffn_dim, HEAD_HIDDEN);
    let layer = 2 * d + 3 * d * d + 3 * d + d * d + d + 2 * d + 2 * d * f + f + d;
    c * d + d + 2 * d + t * d + l * layer + d * h + h + h + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Parameter indices of one encoder layer.
#[derive(Debug, Clone, Copy)]
struct LayerIdx {
    ln1_g: usize,
    ln1_b: usize,
    qkv_w: usize,
    qkv_b: usize,
    out_w: usize,
    out_b: usize,
    ln2_g: usize,
    ln2_b: usize,
    ff1_w: usize,
    ff1_b: usize,
    ff2_w: usize,
    ff2_b: usize,
}

const P_IN_W: usize = 0;
const P_IN_B: usize = 1;
const P_IN_G: usize = 2;
const P_IN_BETA: usize = 3;
const P_POS: usize = 4;
const PER_LAYER: usize = 12;

fn layer_idx(l: usize) -> LayerIdx {
    let o = P_POS + 1 + l * PER_LAYER;
    LayerIdx {
        ln1_g: o,
        ln1_b: o + 1,
        qkv_w: o + 2,
        qkv_b: o + 3,
        out_w: o + 4,
        out_b: o + 5,
        ln2_g: o + 6,
        ln2_b: o + 7,
        ff1_w: o + 8,
        ff1_b: o + 9,
        ff2_w: o + 10,
        ff2_b: o + 11,
    }
}

/// One forward pass: per-window score prediction and instability logit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `100 * sigmoid(-logit)`, higher is more stable.
    pub nvi_pred: f64,
    /// Log-odds of the unstable class.
    pub logit: f64,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        Self {
            nvi_pred: 100.0 * sigmoid(-logit),
            logit,
        }
    }
}

/// Output of [`Model::build`]: the logit node and, per layer, the attention
/// node (for inspecting probabilities).
pub struct Graph {
    pub logits: NodeId,
    pub attention: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: Vec<Mat>,
    pub names: Vec<String>,
    /// Per-channel input standardisation, fixed after construction.
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
}

impl Model {
    /// Xavier-uniform linear weights, zero biases, unit norm gains and
    /// N(0, 0.02) positions, drawn from `(seed, [model, 0])`.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::stream(seed, &[rng::DOMAIN_MODEL, 0]);
        let (c, d, f, t) = (cfg.in_channels, cfg.d_model, cfg.ffn_dim, cfg.seq_len);
        let mut params = Vec::new();
        let mut names = Vec::new();
        let mut add = |name: String, m: Mat| {
            names.push(name);
            params.push(m);
        };
        let xavier = |rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize| {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let u = Uniform::new_inclusive(-lim, lim).expect("xavier bounds");
            Mat::from_vec(fan_in, fan_out, (0..fan_in * fan_out).map(|_| u.sample(rng)).collect())
        };
        add("input.weight".into(), xavier(&mut rng, c, d));
        add("input.bias".into(), Mat::zeros(1, d));
        add("input_norm.gamma".into(), Mat::filled(1, d, 1.0));
        add("input_norm.beta".into(), Mat::zeros(1, d));
        let normal = Normal::new(0.0, POS_INIT_SD).expect("pos init");
        add(
            "pos_embedding".into(),
            Mat::from_vec(t, d, (0..t * d).map(|_| normal.sample(&mut rng)).collect()),
        );
        for l in 0..cfg.layers {
            let p = |s: &str| format!("layers.{l}.{s}");
            add(p("ln1.gamma"), Mat::filled(1, d, 1.0));
            add(p("ln1.beta"), Mat::zeros(1, d));
            add(p("attn.qkv.weight"), xavier(&mut rng, d, 3 * d));
            add(p("attn.qkv.bias"), Mat::zeros(1, 3 * d));
            add(p("attn.out.weight"), xavier(&mut rng, d, d));
            add(p("attn.out.bias"), Mat::zeros(1, d));
            add(p("ln2.gamma"), Mat::filled(1, d, 1.0));
            add(p("ln2.beta"), Mat::zeros(1, d));
            add(p("ffn.w1"), xavier(&mut rng, d, f));
            add(p("ffn.b1"), Mat::zeros(1, f));
            add(p("ffn.w2"), xavier(&mut rng, f, d));
            add(p("ffn.b2"), Mat::zeros(1, d));
        }
        add("head.w1".into(), xavier(&mut rng, d, HEAD_HIDDEN));
        add("head.b1".into(), Mat::zeros(1, HEAD_HIDDEN));
        add("head.w2".into(), xavier(&mut rng, HEAD_HIDDEN, 1));
        add("head.b2".into(), Mat::zeros(1, 1));
        Ok(Self {
            cfg,
            params,
            names,
            input_mean: vec![0.0; c],
            input_sd: vec![1.0; c],
        })
    }

    /// Number of trainable scalars actually allocated.
    pub fn allocated_params(&self) -> usize {
        self.params.iter().map(Mat::len).sum()
    }

    fn head_idx(&self) -> [usize; 4] {
        let o = P_POS + 1 + self.cfg.layers * PER_LAYER;
        [o, o + 1, o + 2, o + 3]
    }

    /// Sets the per-channel standardisation from channel-major windows.
    pub fn fit_input_norm(&mut self, windows: &[&[f64]]) -> Result<()> {
        let c = self.cfg.in_channels;
        let n = self.cfg.window_len();
        let mut sum = vec![0.0; c];
        let mut sq = vec![0.0; c];
        let mut count = 0.0;
        for w in windows {
            self.check_window(w)?;
            for ch in 0..c {
                for v in &w[ch * n..(ch + 1) * n] {
                    sum[ch] += v;
                    sq[ch] += v * v;
                }
            }
            count += n as f64;
        }
        if count == 0.0 {
            return Err(ModelError::EmptySplit("no windows for input statistics".into()));
        }
        for ch in 0..c {
            let m = sum[ch] / count;
            let var = (sq[ch] / count - m * m).max(0.0);
            self.input_mean[ch] = m;
            self.input_sd[ch] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Ok(())
    }

    fn check_window(&self, w: &[f64]) -> Result<()> {
        let want = self.cfg.in_channels * self.cfg.window_len();
        if w.len() != want {
            return Err(shape_err(
                format!(
                    "{} channels x {} samples ({} tokens x patch {}) = {want}",
                    self.cfg.in_channels,
                    self.cfg.window_len(),
                    self.cfg.seq_len,
                    self.cfg.patch
                ),
                format!("{} values", w.len()),
            ));
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(format!("input sample {i}")));
        }
        Ok(())
    }

    /// Standardised patch means of one channel-major window, `seq_len x C`.
    pub fn tokens(&self, window: &[f64]) -> Result<Mat> {
        self.check_window(window)?;
        let (c, t, p) = (self.cfg.in_channels, self.cfg.seq_len, self.cfg.patch);
        let n = t * p;
        let mut out = Mat::zeros(t, c);
        for ch in 0..c {
            let x = &window[ch * n..(ch + 1) * n];
            for (k, chunk) in x.chunks_exact(p).enumerate() {
                let m = chunk.iter().sum::<f64>() / p as f64;
                out.data[k * c + ch] = (m - self.input_mean[ch]) / self.input_sd[ch];
            }
        }
        Ok(out)
    }

    /// Stacks the tokens of several windows into `(batch * seq_len) x C`.
    pub fn batch_tokens(&self, windows: &[&[f64]]) -> Result<Mat> {
        let c = self.cfg.in_channels;
        let t = self.cfg.seq_len;
        let mut out = Mat::zeros(windows.len() * t, c);
        for (b, w) in windows.iter().enumerate() {
            let tok = self.tokens(w)?;
            out.data[b * t * c..(b + 1) * t * c].copy_from_slice(&tok.data);
        }
        Ok(out)
    }

    fn mask(&self, rng: &mut Option<&mut ChaCha8Rng>, n: usize) -> Option<Vec<f64>> {
        let p = self.cfg.dropout;
        let rng = rng.as_mut()?;
        if p == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        Some((0..n).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect())
    }

    /// Records the forward graph for stacked tokens. Dropout is applied only
    /// in train mode, with masks drawn from `rng`.
    pub fn build(&self, tape: &mut Tape, tokens: Mat, mode: Mode, rng: Option<&mut ChaCha8Rng>) -> Result<Graph> {
        let (t, c, d) = (self.cfg.seq_len, self.cfg.in_channels, self.cfg.d_model);
        if tokens.cols != c || !tokens.rows.is_multiple_of(t) || tokens.rows == 0 {
            return Err(shape_err(format!("(batch * {t}) x {c} tokens"), format!("{} x {}", tokens.rows, tokens.cols)));
        }
        let batch = tokens.rows / t;
        let mut rng = if mode == Mode::Train { rng } else { None };
        let p = |tape: &mut Tape, i: usize| tape.param(i, &self.params[i]);

        let x = tape.input(tokens);
        let w = p(tape, P_IN_W);
        let b = p(tape, P_IN_B);
        let h = tape.matmul(x, w);
        let h = tape.add_row(h, b);
        let g = p(tape, P_IN_G);
        let be = p(tape, P_IN_BETA);
        let h = tape.layer_norm(h, g, be);
        let pos = p(tape, P_POS);
        let mut x = tape.add_pos(h, pos);

        let mut attention = Vec::with_capacity(self.cfg.layers);
        for l in 0..self.cfg.layers {
            let li = layer_idx(l);
            let (g1, b1) = (p(tape, li.ln1_g), p(tape, li.ln1_b));
            let h = tape.layer_norm(x, g1, b1);
            let (wq, bq) = (p(tape, li.qkv_w), p(tape, li.qkv_b));
            let qkv = tape.matmul(h, wq);
            let qkv = tape.add_row(qkv, bq);
            let a = tape.attention(qkv, batch, t, self.cfg.heads);
            attention.push(a);
            let (wo, bo) = (p(tape, li.out_w), p(tape, li.out_b));
            let o = tape.matmul(a, wo);
            let mut o = tape.add_row(o, bo);
            if let Some(m) = self.mask(&mut rng, batch * t * d) {
                o = tape.dropout(o, m);
            }
            x = tape.add(x, o);

            let (g2, b2) = (p(tape, li.ln2_g), p(tape, li.ln2_b));
            let h = tape.layer_norm(x, g2, b2);
            let (w1, bb1) = (p(tape, li.ff1_w), p(tape, li.ff1_b));
            let f = tape.matmul(h, w1);
            let f = tape.add_row(f, bb1);
            let mut f = tape.gelu(f);
            if let Some(m) = self.mask(&mut rng, batch * t * self.cfg.ffn_dim) {
                f = tape.dropout(f, m);
            }
            let (w2, bb2) = (p(tape, li.ff2_w), p(tape, li.ff2_b));
            let f = tape.matmul(f, w2);
            let mut f = tape.add_row(f, bb2);
            if let Some(m) = self.mask(&mut rng, batch * t * d) {
                f = tape.dropout(f, m);
            }
            x = tape.add(x, f);
        }

        let pooled = tape.mean_pool(x, t);
        let [hw1, hb1, hw2, hb2] = self.head_idx();
        let (w1, b1) = (p(tape, hw1), p(tape, hb1));
        let z = tape.matmul(pooled, w1);
        let z = tape.add_row(z, b1);
        let mut z = tape.gelu(z);
        if let Some(m) = self.mask(&mut rng, batch * HEAD_HIDDEN) {
            z = tape.dropout(z, m);
        }
        let (w2, b2) = (p(tape, hw2), p(tape, hb2));
        let z = tape.matmul(z, w2);
        let logits = tape.add_row(z, b2);
        Ok(Graph { logits, attention })
    }

    /// Forward pass over channel-major windows.
    pub fn forward(&self, windows: &[&[f64]], mode: Mode, rng: Option<&mut ChaCha8Rng>) -> Result<Vec<Prediction>> {
        let tokens = self.batch_tokens(windows)?;
        let mut tape = Tape::new();
        let g = self.build(&mut tape, tokens, mode, rng)?;
        Ok(tape.value(g.logits).data.iter().map(|&z| Prediction::from_logit(z)).collect())
    }

    /// Eval-mode predictions in chunks of `batch`.
    pub fn predict(&self, windows: &[&[f64]], batch: usize) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(batch.max(1)) {
            out.extend(self.forward(chunk, Mode::Eval, None)?);
        }
        Ok(out)
    }
}
