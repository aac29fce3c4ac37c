//! Compact transformer classifier for 4-channel NVI windows.
//!
//! Matrices are row-major `f64`; gradients come from a small tape-based
//! reverse-mode engine ([`tape`]). The head emits one logit per window, read
//! as log-odds of instability; the score prediction is
//! `100 * sigmoid(-logit)` so that high scores mean stable, matching the
//! composite NVI scale.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod logistic;
pub mod optim;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod transformer;

pub use checkpoint::Checkpoint;
pub use error::{ModelError, Result};
pub use logistic::{window_mean_features, LogisticModel};
pub use optim::{adamw_step, cosine_lr, AdamState};
pub use tape::{combined_loss, LossMix, Tape};
pub use tensor::Mat;
pub use train::{history_jsonl, train, EpochRecord, SplitData, TrainConfig, TrainOutcome};
pub use transformer::{param_count, Mode, Model, ModelConfig, Prediction};
