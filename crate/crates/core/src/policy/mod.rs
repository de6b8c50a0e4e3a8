//! Neural C-Uniform action policy and its unsupervised training.

mod actions;
mod network;
mod train;

pub(crate) use actions::sample_index;
pub use actions::{sample_action, ActionPmf, ActionSet, DEFAULT_ACTIONS};
pub use network::{
    features, BatchNorm, Dense, ForwardPass, Gradients, Mode, NetworkShape, PolicyNetwork,
    INPUT_DIM,
};
pub use train::{
    entropy_loss, level_loss_and_grad, soft_assign, train, Adam, LossRecord, SoftAssignment,
    TrainConfig, TrainReport,
};
