//! Double-precision numeric core: tensors, layer forward/backward passes,
//! losses, the Adam optimizer, and a finite-difference gradient checker.
//!
//! The layer set is fixed (dense, temporal convolution, max-over-time
//! pooling, GRU, dropout); there is no general-purpose autodiff. Every
//! backward pass is validated against central finite differences in the
//! tests and by `gradient_check`.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod rng;
pub mod tensor;

pub use adam::{adam_step, AdamHyperParams, AdamState};
pub use gradcheck::{gradient_check, gradient_check_report, GradCheckModel, GradCheckReport};
pub use layers::{
    conv1d_backward, conv1d_temporal, dense_backward, dense_forward, dropout_backward,
    dropout_forward, gru_backward, gru_sequence, max_over_time, max_over_time_backward,
    Activation, Conv1dCache, DenseCache, DropoutCache, GruCache, GruParams, MaxPoolCache,
};
pub use loss::{
    binary_cross_entropy, binary_cross_entropy_with_grad, categorical_cross_entropy,
    categorical_cross_entropy_with_grad, PROB_FLOOR,
};
pub use rng::RandomSource;
pub use tensor::{Parameter, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: {detail}")]
    ShapeMismatch { context: String, detail: String },
    #[error("non-finite value produced in {layer}")]
    NonFinite { layer: String },
    #[error("empty sequence passed to {0}")]
    EmptySequence(String),
    #[error("target row {0} is not one-hot")]
    TargetNotOneHot(usize),
    #[error("NaN gradient detected in parameter {0}")]
    NanGradient(String),
    #[error("invalid probability row {row}: sums to {sum}")]
    InvalidProbability { row: usize, sum: f64 },
}
