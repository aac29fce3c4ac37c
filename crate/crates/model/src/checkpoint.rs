//! Checkpoint container.
//!
//! Layout: magic `NVICKPT1`, u64 little-endian header length, UTF-8 JSON
//! header, then every tensor listed in the header as row-major f64
//! little-endian values in header order.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{ModelError, Result};
use crate::optim::AdamState;
use crate::tensor::Mat;
use crate::train::TrainConfig;
use crate::transformer::{Model, ModelConfig};

const MAGIC: &[u8; 8] = b"NVICKPT1";
pub const FORMAT_VERSION: u32 = 1;

/// Where a resumed run would pick up its random streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub next_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_cfg: ModelConfig,
    pub train_cfg: TrainConfig,
    pub names: Vec<String>,
    pub params: Vec<Mat>,
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
    pub adam: AdamState,
    pub epoch: usize,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub rng: RngState,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    input_mean: Vec<f64>,
    input_sd: Vec<f64>,
    epoch: usize,
    best_epoch: usize,
    best_val_auc: f64,
    rng: RngState,
    adam_step: u64,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model> {
        let mut m = Model::new(self.model_cfg, 0)?;
        if m.names != self.names {
            return Err(ModelError::Checkpoint("parameter names do not match the configuration".into()));
        }
        for (p, q) in m.params.iter().zip(&self.params) {
            if p.shape() != q.shape() {
                return Err(ModelError::Checkpoint("parameter shapes do not match the configuration".into()));
            }
        }
        m.params = self.params.clone();
        m.input_mean = self.input_mean.clone();
        m.input_sd = self.input_sd.clone();
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut order: Vec<&Mat> = Vec::new();
        let groups = [("", &self.params), ("adam.m.", &self.adam.m), ("adam.v.", &self.adam.v)];
        for (prefix, mats) in groups {
            for (name, m) in self.names.iter().zip(mats.iter()) {
                tensors.push(TensorEntry {
                    name: format!("{prefix}{name}"),
                    rows: m.rows,
                    cols: m.cols,
                });
                order.push(m);
            }
        }
        let header = Header {
            version: FORMAT_VERSION,
            model_cfg: self.model_cfg,
            train_cfg: self.train_cfg,
            input_mean: self.input_mean.clone(),
            input_sd: self.input_sd.clone(),
            epoch: self.epoch,
            best_epoch: self.best_epoch,
            best_val_auc: self.best_val_auc,
            rng: self.rng,
            adam_step: self.adam.step,
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * order.iter().map(|m| m.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for m in order {
            for v in &m.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| ModelError::Checkpoint(m.into());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(err("not a checkpoint file"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| err("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if header.version != FORMAT_VERSION {
            return Err(err("unsupported checkpoint version"));
        }
        let mut data = &bytes[16 + hlen..];
        let mut mats = Vec::with_capacity(header.tensors.len());
        for t in &header.tensors {
            let n = t.rows * t.cols;
            if data.len() < 8 * n {
                return Err(err("truncated tensor data"));
            }
            let v = data[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            mats.push(Mat::from_vec(t.rows, t.cols, v));
            data = &data[8 * n..];
        }
        if !data.is_empty() || mats.len() % 3 != 0 {
            return Err(err("unexpected trailing data"));
        }
        let k = mats.len() / 3;
        let names = header.tensors[..k].iter().map(|t| t.name.clone()).collect();
        let v = mats.split_off(2 * k);
        let m = mats.split_off(k);
        Ok(Self {
            model_cfg: header.model_cfg,
            train_cfg: header.train_cfg,
            names,
            params: mats,
            input_mean: header.input_mean,
            input_sd: header.input_sd,
            adam: AdamState {
                step: header.adam_step,
                m,
                v,
            },
            epoch: header.epoch,
            best_epoch: header.best_epoch,
            best_val_auc: header.best_val_auc,
            rng: header.rng,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
