//! Tape-based reverse-mode autodiff over 2-D matrices.
//!
//! Every op appends a node holding its output value and whatever it needs
//! for the backward pass. `backward` walks the tape once in reverse.

use crate::error::{ModelError, Result};
use crate::tensor::{gemm, Mat};

pub type NodeId = usize;

/// Logits beyond this magnitude are clamped inside the loss.
pub const LOGIT_CAP: f64 = 30.0;

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * INV_SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * INV_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of the combined loss: `mse * MSE + bce * BCE`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossMix {
    pub mse: f64,
    pub bce: f64,
}

impl Default for LossMix {
    fn default() -> Self {
        Self { mse: 0.7, bce: 0.3 }
    }
}

enum Op {
    Leaf { param: Option<usize> },
    MatMul { a: NodeId, b: NodeId },
    AddRow { a: NodeId, v: NodeId },
    Add { a: NodeId, b: NodeId },
    AddPos { x: NodeId, pos: NodeId },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Vec<f64>, rstd: Vec<f64> },
    Gelu { x: NodeId },
    Dropout { x: NodeId, mask: Vec<f64> },
    Attention { qkv: NodeId, batch: usize, seq: usize, heads: usize, probs: Vec<f64> },
    MeanPool { x: NodeId, seq: usize },
    Loss { logit: NodeId, targets: Vec<f64>, labels: Vec<f64>, pos_weight: f64, mix: LossMix },
}

struct Node {
    value: Mat,
    op: Op,
}

pub const LN_EPS: f64 = 1e-5;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf { param: None })
    }

    pub fn param(&mut self, index: usize, value: &Mat) -> NodeId {
        self.push(value.clone(), Op::Leaf { param: Some(index) })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        let mut c = Mat::zeros(av.rows, bv.cols);
        gemm(1.0, &av.data, av.rows, av.cols, false, &bv.data, bv.rows, bv.cols, false, 0.0, &mut c.data);
        self.push(c, Op::MatMul { a, b })
    }

    /// Adds the 1 x m row `v` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, v: NodeId) -> NodeId {
        let mut out = self.nodes[a].value.clone();
        let row = &self.nodes[v].value.data;
        for r in out.data.chunks_exact_mut(row.len()) {
            for (o, b) in r.iter_mut().zip(row) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow { a, v })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut out = self.nodes[a].value.clone();
        out.add_assign(&self.nodes[b].value);
        self.push(out, Op::Add { a, b })
    }

    /// Adds the `seq x d` table `pos` to each block of `seq` rows of `x`.
    pub fn add_pos(&mut self, x: NodeId, pos: NodeId) -> NodeId {
        let mut out = self.nodes[x].value.clone();
        let p = &self.nodes[pos].value.data;
        for block in out.data.chunks_exact_mut(p.len()) {
            for (o, b) in block.iter_mut().zip(p) {
                *o += b;
            }
        }
        self.push(out, Op::AddPos { x, pos })
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let (g, b) = (&self.nodes[gamma].value.data, &self.nodes[beta].value.data);
        let d = xv.cols;
        let mut out = Mat::zeros(xv.rows, d);
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; xv.rows];
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out.data[r * d + j] = g[j] * h + b[j];
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd })
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let out = Mat::from_vec(xv.rows, xv.cols, xv.data.iter().map(|&v| gelu(v)).collect());
        self.push(out, Op::Gelu { x })
    }

    /// Elementwise product with a pre-scaled keep mask.
    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let xv = &self.nodes[x].value;
        assert_eq!(mask.len(), xv.len(), "dropout mask size");
        let out = Mat::from_vec(xv.rows, xv.cols, xv.data.iter().zip(&mask).map(|(a, m)| a * m).collect());
        self.push(out, Op::Dropout { x, mask })
    }

    /// Multi-head scaled dot-product self-attention. `qkv` rows are
    /// `[q | k | v]`, each `d` wide and split into `heads` contiguous slices.
    pub fn attention(&mut self, qkv: NodeId, batch: usize, seq: usize, heads: usize) -> NodeId {
        let xv = &self.nodes[qkv].value;
        let d = xv.cols / 3;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Mat::zeros(batch * seq, d);
        let mut probs = vec![0.0; batch * heads * seq * seq];
        let mut q = vec![0.0; seq * dh];
        let mut k = vec![0.0; seq * dh];
        let mut v = vec![0.0; seq * dh];
        let mut o = vec![0.0; seq * dh];
        for b in 0..batch {
            for h in 0..heads {
                gather(xv, b * seq, seq, h * dh, dh, &mut q);
                gather(xv, b * seq, seq, d + h * dh, dh, &mut k);
                gather(xv, b * seq, seq, 2 * d + h * dh, dh, &mut v);
                let p = &mut probs[(b * heads + h) * seq * seq..][..seq * seq];
                gemm(scale, &q, seq, dh, false, &k, seq, dh, true, 0.0, p);
                for row in p.chunks_exact_mut(seq) {
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut s = 0.0;
                    for e in row.iter_mut() {
                        *e = (*e - m).exp();
                        s += *e;
                    }
                    for e in row.iter_mut() {
                        *e /= s;
                    }
                }
                gemm(1.0, p, seq, seq, false, &v, seq, dh, false, 0.0, &mut o);
                scatter(&mut out, b * seq, seq, h * dh, dh, &o, false);
            }
        }
        self.push(out, Op::Attention { qkv, batch, seq, heads, probs })
    }

    /// Attention probabilities of an attention node, `[batch][head][query][key]`
    /// flattened.
    pub fn attention_probs(&self, id: NodeId) -> Option<&[f64]> {
        match &self.nodes[id].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Mean over each block of `seq` rows.
    pub fn mean_pool(&mut self, x: NodeId, seq: usize) -> NodeId {
        let xv = &self.nodes[x].value;
        let batch = xv.rows / seq;
        let mut out = Mat::zeros(batch, xv.cols);
        for b in 0..batch {
            for t in 0..seq {
                for (o, v) in out.row_mut(b).iter_mut().zip(xv.row(b * seq + t)) {
                    *o += v / seq as f64;
                }
            }
        }
        self.push(out, Op::MeanPool { x, seq })
    }

    /// Combined loss over a `batch x 1` logit column. The score prediction is
    /// `100 * sigmoid(-logit)`; `targets` are NVI scores in [0, 100] and
    /// `labels` are 1 for the unstable class.
    pub fn loss(&mut self, logit: NodeId, targets: &[f64], labels: &[f64], pos_weight: f64, mix: LossMix) -> Result<NodeId> {
        let z = &self.nodes[logit].value;
        if z.cols != 1 || z.rows != targets.len() || z.rows != labels.len() {
            return Err(crate::error::shape_err(
                format!("{} x 1 logits", targets.len()),
                format!("{} x {}", z.rows, z.cols),
            ));
        }
        let value = batch_loss(&z.data, targets, labels, pos_weight, mix)?;
        Ok(self.push(
            Mat::filled(1, 1, value),
            Op::Loss {
                logit,
                targets: targets.to_vec(),
                labels: labels.to_vec(),
                pos_weight,
                mix,
            },
        ))
    }

    /// Reverse pass from a 1 x 1 node. Returns the gradient of every
    /// parameter leaf, indexed by parameter number (`None` when unused).
    pub fn backward(&self, root: NodeId, n_params: usize) -> Result<Vec<Option<Mat>>> {
        if self.nodes[root].value.shape() != (1, 1) {
            return Err(crate::error::shape_err("1 x 1 loss", format!("{:?}", self.nodes[root].value.shape())));
        }
        if matches!(self.nodes[root].op, Op::Leaf { .. }) {
            return Err(ModelError::Detached);
        }
        let mut grads: Vec<Option<Mat>> = (0..=root).map(|_| None).collect();
        grads[root] = Some(Mat::filled(1, 1, 1.0));
        let mut out: Vec<Option<Mat>> = (0..n_params).map(|_| None).collect();
        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(p) = param {
                        match &mut out[*p] {
                            Some(acc) => acc.add_assign(&g),
                            slot => *slot = Some(g),
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let mut da = Mat::zeros(av.rows, av.cols);
                    gemm(1.0, &g.data, g.rows, g.cols, false, &bv.data, bv.rows, bv.cols, true, 0.0, &mut da.data);
                    let mut db = Mat::zeros(bv.rows, bv.cols);
                    gemm(1.0, &av.data, av.rows, av.cols, true, &g.data, g.rows, g.cols, false, 0.0, &mut db.data);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow { a, v } => {
                    let mut dv = Mat::zeros(1, g.cols);
                    for r in g.data.chunks_exact(g.cols) {
                        for (o, x) in dv.data.iter_mut().zip(r) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads, *v, dv);
                    accumulate(&mut grads, *a, g);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddPos { x, pos } => {
                    let pv = &self.nodes[*pos].value;
                    let mut dp = Mat::zeros(pv.rows, pv.cols);
                    for block in g.data.chunks_exact(pv.len()) {
                        for (o, v) in dp.data.iter_mut().zip(block) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *pos, dp);
                    accumulate(&mut grads, *x, g);
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let gam = &self.nodes[*gamma].value.data;
                    let d = g.cols;
                    let mut dg = Mat::zeros(1, d);
                    let mut db = Mat::zeros(1, d);
                    let mut dx = Mat::zeros(g.rows, d);
                    let mut gh = vec![0.0; d];
                    for r in 0..g.rows {
                        let gr = g.row(r);
                        let xh = &xhat[r * d..(r + 1) * d];
                        let (mut m1, mut m2) = (0.0, 0.0);
                        for j in 0..d {
                            dg.data[j] += gr[j] * xh[j];
                            db.data[j] += gr[j];
                            gh[j] = gr[j] * gam[j];
                            m1 += gh[j];
                            m2 += gh[j] * xh[j];
                        }
                        m1 /= d as f64;
                        m2 /= d as f64;
                        for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = rstd[r] * (gh[j] - m1 - xh[j] * m2);
                        }
                    }
                    accumulate(&mut grads, *gamma, dg);
                    accumulate(&mut grads, *beta, db);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Gelu { x } => {
                    let xv = &self.nodes[*x].value;
                    let dx = Mat::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&xv.data).map(|(gi, xi)| gi * gelu_grad(*xi)).collect(),
                    );
                    accumulate(&mut grads, *x, dx);
                }
                Op::Dropout { x, mask } => {
                    let dx = Mat::from_vec(g.rows, g.cols, g.data.iter().zip(mask).map(|(a, m)| a * m).collect());
                    accumulate(&mut grads, *x, dx);
                }
                Op::Attention { qkv, batch, seq, heads, probs } => {
                    let dx = attention_backward(&self.nodes[*qkv].value, &g, *batch, *seq, *heads, probs);
                    accumulate(&mut grads, *qkv, dx);
                }
                Op::MeanPool { x, seq } => {
                    let xv = &self.nodes[*x].value;
                    let mut dx = Mat::zeros(xv.rows, xv.cols);
                    for r in 0..xv.rows {
                        let b = r / seq;
                        for (o, v) in dx.row_mut(r).iter_mut().zip(g.row(b)) {
                            *o = v / *seq as f64;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Loss { logit, targets, labels, pos_weight, mix } => {
                    let z = &self.nodes[*logit].value.data;
                    let scale = g.data[0];
                    let n = z.len() as f64;
                    let dz: Vec<f64> = z
                        .iter()
                        .zip(targets)
                        .zip(labels)
                        .map(|((&zi, &t), &y)| {
                            if zi.abs() >= LOGIT_CAP {
                                return 0.0;
                            }
                            let s = sigmoid(-zi);
                            let d_mse = 2.0 * (s - t / 100.0) * (-s * (1.0 - s));
                            let p = sigmoid(zi);
                            let d_bce = -pos_weight * y * (1.0 - p) + (1.0 - y) * p;
                            scale * (mix.mse * d_mse + mix.bce * d_bce) / n
                        })
                        .collect();
                    accumulate(&mut grads, *logit, Mat::from_vec(z.len(), 1, dz));
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Mat>], id: NodeId, g: Mat) {
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn gather(x: &Mat, row0: usize, rows: usize, col0: usize, width: usize, out: &mut [f64]) {
    for t in 0..rows {
        out[t * width..(t + 1) * width].copy_from_slice(&x.row(row0 + t)[col0..col0 + width]);
    }
}

fn scatter(x: &mut Mat, row0: usize, rows: usize, col0: usize, width: usize, src: &[f64], add: bool) {
    for t in 0..rows {
        let dst = &mut x.row_mut(row0 + t)[col0..col0 + width];
        let s = &src[t * width..(t + 1) * width];
        if add {
            for (d, v) in dst.iter_mut().zip(s) {
                *d += v;
            }
        } else {
            dst.copy_from_slice(s);
        }
    }
}

fn attention_backward(qkv: &Mat, g: &Mat, batch: usize, seq: usize, heads: usize, probs: &[f64]) -> Mat {
    let d = qkv.cols / 3;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dx = Mat::zeros(qkv.rows, qkv.cols);
    let mut q = vec![0.0; seq * dh];
    let mut k = vec![0.0; seq * dh];
    let mut v = vec![0.0; seq * dh];
    let mut go = vec![0.0; seq * dh];
    let mut dp = vec![0.0; seq * seq];
    let mut dq = vec![0.0; seq * dh];
    let mut dk = vec![0.0; seq * dh];
    let mut dv = vec![0.0; seq * dh];
    for b in 0..batch {
        for h in 0..heads {
            gather(qkv, b * seq, seq, h * dh, dh, &mut q);
            gather(qkv, b * seq, seq, d + h * dh, dh, &mut k);
            gather(qkv, b * seq, seq, 2 * d + h * dh, dh, &mut v);
            gather(g, b * seq, seq, h * dh, dh, &mut go);
            let p = &probs[(b * heads + h) * seq * seq..][..seq * seq];
            gemm(1.0, p, seq, seq, true, &go, seq, dh, false, 0.0, &mut dv);
            gemm(1.0, &go, seq, dh, false, &v, seq, dh, true, 0.0, &mut dp);
            for (prow, drow) in p.chunks_exact(seq).zip(dp.chunks_exact_mut(seq)) {
                let dot: f64 = prow.iter().zip(drow.iter()).map(|(a, b)| a * b).sum();
                for (dr, pr) in drow.iter_mut().zip(prow) {
                    *dr = pr * (*dr - dot);
                }
            }
            gemm(scale, &dp, seq, seq, false, &k, seq, dh, false, 0.0, &mut dq);
            gemm(scale, &dp, seq, seq, true, &q, seq, dh, false, 0.0, &mut dk);
            scatter(&mut dx, b * seq, seq, h * dh, dh, &dq, true);
            scatter(&mut dx, b * seq, seq, d + h * dh, dh, &dk, true);
            scatter(&mut dx, b * seq, seq, 2 * d + h * dh, dh, &dv, true);
        }
    }
    dx
}

/// Mean combined loss over a batch of logits.
pub fn batch_loss(logits: &[f64], targets: &[f64], labels: &[f64], pos_weight: f64, mix: LossMix) -> Result<f64> {
    let mut total = 0.0;
    for ((&z, &t), &y) in logits.iter().zip(targets).zip(labels) {
        total += combined_loss(100.0 * sigmoid(-z), z, t, y, pos_weight, mix)?;
    }
    Ok(total / logits.len().max(1) as f64)
}

/// Per-example combined loss:
/// `mix.mse * (pred/100 - target/100)^2 + mix.bce * weighted BCE(logit, label)`.
pub fn combined_loss(nvi_pred: f64, logit: f64, nvi_target: f64, label: f64, pos_weight: f64, mix: LossMix) -> Result<f64> {
    for (name, v) in [("nvi_pred", nvi_pred), ("logit", logit), ("nvi_target", nvi_target), ("label", label), ("pos_weight", pos_weight)] {
        if !v.is_finite() {
            return Err(ModelError::NonFinite(name.into()));
        }
    }
    let z = logit.clamp(-LOGIT_CAP, LOGIT_CAP);
    let mse = (nvi_pred / 100.0 - nvi_target / 100.0).powi(2);
    // ln sigmoid(z) = -softplus(-z)
    let softplus = |x: f64| if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    let bce = pos_weight * label * softplus(-z) + (1.0 - label) * softplus(z);
    Ok(mix.mse * mse + mix.bce * bce)
}
