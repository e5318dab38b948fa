//! Policies and the training loop.

mod policy;
mod train;

pub use policy::{
    policy_update, surrogate_loss_and_grads, Policy, PolicyBatch, PolicyGrads, PolicyOptimizer,
    UpdateConfig, ValueFn,
};
pub use train::{train, TrainConfig, TrainingArtifacts};
