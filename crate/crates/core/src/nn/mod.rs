//! Layers with hand-written backward passes, losses, Adam and gradient checking.
//!
//! Every layer exposes `forward`/`run` on flat row-major slices plus a
//! matching backward that reads the layer's values and accumulates into the
//! gradient slots of a second instance of the same type. Keeping gradients in
//! a structural twin lets a model's gradient buffer be another copy of the
//! model.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod param;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv1d, conv1d_transpose, Conv1d, ConvTranspose1d};
pub use dense::{Dense, Embedding};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use loss::{
    add_l2_grad, class_weights, cross_entropy_with_grad, l2_regularization, mse_loss,
    mse_with_grad, weighted_cross_entropy,
};
pub use lstm::{bilstm_layer, lstm_cell_step, BiLstm, BiState, LstmCell, LstmState};
pub use param::{Module, Param, ParamKind};
