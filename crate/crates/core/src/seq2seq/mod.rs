//! Attention encoder-decoder: model construction, teacher-forced training,
//! checkpoints and greedy decoding.

mod checkpoint;
mod config;
mod decode;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CheckpointError, FORMAT_VERSION, MAGIC};
pub use config::{format_buckets, parse_buckets, ModelConfig};
pub use decode::{argmax, greedy_decode, summarize_text};
pub use model::{backward_batch, build_model, forward_batch, train_step, BatchForward, ModelParams};
pub use train::{
    checkpoint_file_name, train_loop, validation_loss, BucketedData, LrSchedule, TrainLogEntry, TrainOutcome, Trainer,
    PATIENCE,
};

pub(crate) use config::CONFIG_KEYS;

use crate::nnkernel::KernelError;
use crate::textproc::TextError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("token id {id} outside a vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("non-finite loss; training halted")]
    NonFiniteLoss,
    #[error("empty input")]
    EmptyInput,
    #[error("training and validation sets must be non-empty")]
    EmptyDataset,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ModelError>;
