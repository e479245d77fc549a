//! Small convolutional network engine: conv2d, ReLU, dense, sigmoid,
//! quadratic loss and plain SGD.

mod checkpoint;
mod layers;
mod network;
mod tensor;
mod train;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, load_checkpoint_for, network_from_bytes, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use layers::LayerSpec;
pub use network::{loss_quadratic, loss_quadratic_grad, top_k, Architecture, Gradients, Network};
pub use tensor::Tensor;
pub use train::{error_rate, is_correct, predict_items, train, train_with, EpochRecord, TrainConfig, TrainingLog};
