//! Dense-network primitives: matrices, layers, losses, backpropagation,
//! Adam and a finite-difference gradient checker.

pub mod adam;
pub mod config;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod network;

pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;
pub use gradcheck::gradient_check;
pub use layer::{sigmoid, Activation, DenseLayer, LayerCache, LayerGrads, LayerOptim};
pub use loss::{bce_logit_grad, bce_loss, mse_loss, Loss, PROB_EPS};
pub use matrix::Matrix;
pub use network::Sequential;
