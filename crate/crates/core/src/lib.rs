//! Epistemic neural networks (ENNs) and the approximate Thompson sampling
//! agents built on them.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, ReLU MLPs with hand-written backprop,
//!   losses, Adam and a splittable counter-based RNG.
//! - [`enn`]: the `f(x, z)` abstraction and six variants (mlp, ensemble,
//!   dropout, hypermodel, ensemble with prior functions, epinet), plus
//!   joint predictions and compute accounting.
//! - [`testbed`]: random-MLP classification problems scored by marginal
//!   and joint negative log-likelihood.
//! - [`bandit`]: the one-unknown-action bandit and the neural bandit, driven
//!   by Thompson sampling through ENN index samples.
//! - [`dqn`] and [`envs`]: ENN-DQN with a replay buffer and target network
//!   on DeepSea and a reward chain.

pub mod bandit;
pub mod dqn;
pub mod enn;
pub mod envs;
mod error;
pub mod numerics;
pub mod testbed;

pub use error::{Error, Result};
