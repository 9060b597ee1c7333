//! Bandit environments and Thompson sampling driven by an ENN.

mod env;
mod example;
mod neural;

pub use env::{argmax_random_tie, BanditEnv, NeuralBanditEnv, OneUnknownActionEnv};
pub use example::{run_one_unknown, OneUnknownAgent};
pub use neural::{run_bandit, run_neural_bandit, ts_action, ts_step, BanditAgent, BanditRun, BanditRunConfig, RegretTrace};
