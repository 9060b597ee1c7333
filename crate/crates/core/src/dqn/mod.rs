//! ENN-driven deep Q-learning: one index per episode, greedy actions under
//! that index, and replayed TD updates against a periodically copied target.

mod agent;
mod replay;

pub use agent::{
    batch_update, calibrate_prior_scale, run_episode, run_rl, select_action, td_loss, AgentState, Calibration,
    DqnConfig, EpisodeOutcome, LossKind, RlRun, Transition,
};
pub use replay::ReplayBuffer;
