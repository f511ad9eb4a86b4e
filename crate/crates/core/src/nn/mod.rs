//! Dense feed-forward networks with hand-written backpropagation.
//!
//! All arithmetic is `f64`. Batches are row-major `ndarray` matrices, one
//! instance per row, and gradients of batch losses are means over rows.

mod loss;
mod net;
mod optim;
mod train;

pub use loss::{cross_entropy, cross_entropy_batch, log_softmax, softmax};
pub use net::{as_batch, Activation, DenseLayer, DenseNet, GradientSet, LayerGrad, Trace};
pub use optim::{Optimizer, OptimizerState};
pub use train::{
    backward, privatized_backward, train_classifier, Architecture, FrozenModel, GradientNoise,
    LayerRecord, NetCheckpoint, TrainConfig, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};

pub(crate) use train::fit_network;
