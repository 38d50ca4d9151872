//! Embedding network, affinity loss and the training loop.

pub mod adam;
pub mod cell;
pub mod loss;
pub mod net;
pub mod train;

pub use adam::{clip_global_norm, Adam};
pub use cell::CellKind;
pub use loss::{dc_loss, dc_loss_grad};
pub use net::{EmbeddingNetwork, ForwardCache, Mode, NetConfig, TensorSpec};
pub use train::{
    build_example, log_magnitude_features, train_clips, train_examples, train_examples_from,
    ClipData, TrainConfig, TrainError, TrainExample, TrainedModel, TARGET_SILENCE_FLOOR_DB,
};
