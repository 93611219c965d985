//! Redundancy-reduction objective, view generation and a toy trainer.

pub mod augment;
pub mod data;
pub mod fixture;
pub mod loss;
pub mod train;

pub use augment::{augment_pair, AugmentationSpec};
pub use data::SampleSet;
pub use loss::{bt_loss, bt_loss_and_gradient, bt_loss_gradient, cross_correlation, CrossCorrelation};
pub use train::{bt_train_toy, Encoder, TrainConfig, TrainTrace};
