//! Classifier machinery: linear heads, softmax cross-entropy, inverted
//! dropout, Adam, and logit-space weight imprinting.

mod adam;
mod dropout;
mod imprint;
mod linear;
mod loss;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use dropout::{apply_dropout, dropout_mask, Mode};
pub use imprint::{imprint, ImprintedHead};
pub use linear::LinearHead;
pub use loss::{argmax, softmax, softmax_xent};
pub use train::{head_loss_and_grad, train_head, HeadTrainConfig};
