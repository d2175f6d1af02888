//! From-scratch neural networks: tensors, layers with hand-derived gradients,
//! Adam, and the training and evaluation loops for the digit classifiers.

mod adam;
pub mod gradcheck;
mod io;
pub mod layers;
mod loss;
mod model;
mod scalar;
mod tensor;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use io::{confusion_csv, decode_model, encode_model, load_model, metrics_csv, save_model, ModelHeader, TensorEntry, MODEL_MAGIC, MODEL_VERSION};
pub use loss::{argmax, cross_entropy, softmax, softmax_cross_entropy, LossOutput, CE_EPSILON};
pub use model::{LayerSpec, ModelId, ModelSpec, Network};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use train::{
    evaluate_network, images_to_batch, prediction_from_logits, train, ConfusionMatrix, EpochMetrics, Evaluation,
    ModelBundle, Prediction, Recipe, TrainConfig, TrainReport, TrainingMetadata,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("batchnorm inference needs running statistics from at least one training batch")]
    MissingRunningStats,
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    DivergenceDetected { epoch: usize, report: Box<TrainReport> },
    #[error("model format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
