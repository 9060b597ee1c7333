//! Epistemic neural networks: `f(x, z)` with an index `z` drawn from a
//! reference distribution.

mod config;
mod cost;
mod epinet;
mod hypermodel;
mod joint;
mod objective;
mod params;
mod particles;
mod rows;
mod train;

pub use config::{EnnConfig, EpistemicIndex, ReferenceDistribution, Variant};
pub use cost::{flops_per_forward, param_count, ParamCount};
pub use joint::{
    evaluation_indices, joint_prediction, joint_prediction_with, log_joint_likelihood, JointTable, MAX_OUTCOMES,
};
pub use objective::{LossGrad, Objective};
pub use params::{EnnParams, PriorCalibration};
pub use train::Trainer;
