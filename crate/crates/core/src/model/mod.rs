//! The learnable model: ego embeddings, three diffusion scales, prediction
//! heads, cross-entropy, hand-written backpropagation and training.

mod checkpoint;
mod layers;
mod params;
mod pipeline;
mod train;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use layers::{
    accuracy, ce_loss, ce_loss_from_logits, concat_embeddings, ego_embed, head_forward, predict_hadamard,
    predict_labels, predict_mlp, softmax_rows, HeadOutput,
};
pub use params::{
    Head, ModelParams, Param, EGO_BIAS, EGO_WEIGHT, MIX_BIAS, MIX_WEIGHT, OUT_BIAS, OUT_WEIGHT, SCALE,
};
pub use pipeline::{Dropout, ForwardCache, Pipeline};
pub use train::{evaluate, train, AdamW, EpochRecord, Precision, TrainConfig, TrainOutcome};
