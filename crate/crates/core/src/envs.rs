//! Episodic exploration environments with one-hot state encodings.

use crate::numerics::Rng;
use crate::{Error, Result};

/// Outcome of one environment step. `state` is all zeros when `terminal`.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub state: Vec<f64>,
    pub terminal: bool,
}

pub trait Environment {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Maximum episode length.
    fn horizon(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<Step>;
    /// Best achievable undiscounted episode return.
    fn optimal_return(&self) -> f64;
}

fn one_hot(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

fn check_action(action: usize, count: usize) -> Result<()> {
    if action < count {
        Ok(())
    } else {
        Err(Error::InvalidAction { action, count })
    }
}

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// `N x N` grid descended one row per step. Moving right costs `0.01 / N`
/// and moving right from the bottom-right cell pays 1. Each cell may swap
/// the meaning of the two actions.
#[derive(Clone, Debug)]
pub struct DeepSea {
    size: usize,
    flipped: Vec<bool>,
    row: usize,
    col: usize,
    done: bool,
}

impl DeepSea {
    pub fn new(size: usize, seed: u64, flip_mask: bool) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("deep sea size must be positive".into()));
        }
        let mut rng = Rng::new(seed).child("deep-sea-mask");
        let flipped = (0..size * size).map(|_| flip_mask && rng.bernoulli(0.5)).collect();
        Ok(Self {
            size,
            flipped,
            row: 0,
            col: 0,
            done: false,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// The action that moves right in cell `(row, col)`.
    pub fn right_action(&self, row: usize, col: usize) -> usize {
        if self.flipped[row * self.size + col] {
            LEFT
        } else {
            RIGHT
        }
    }

    pub fn position(&self) -> (usize, usize) {
        (self.row, self.col)
    }

    fn encode(&self) -> Vec<f64> {
        one_hot(self.size * self.size, self.row * self.size + self.col)
    }
}

impl Environment for DeepSea {
    fn name(&self) -> &'static str {
        "deep_sea"
    }

    fn state_dim(&self) -> usize {
        self.size * self.size
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.size
    }

    fn reset(&mut self) -> Vec<f64> {
        (self.row, self.col, self.done) = (0, 0, false);
        self.encode()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 2)?;
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let n = self.size;
        let right = action == self.right_action(self.row, self.col);
        let mut reward = 0.0;
        if right {
            reward -= 0.01 / n as f64;
            if self.row == n - 1 && self.col == n - 1 {
                reward += 1.0;
            }
            self.col = (self.col + 1).min(n - 1);
        } else {
            self.col = self.col.saturating_sub(1);
        }
        self.row += 1;
        self.done = self.row == n;
        let state = if self.done {
            vec![0.0; n * n]
        } else {
            self.encode()
        };
        Ok(Step {
            reward,
            state,
            terminal: self.done,
        })
    }

    fn optimal_return(&self) -> f64 {
        0.99
    }
}

/// Line of `length` cells starting at the left end; reaching the right end
/// pays 1 and ends the episode. Episodes are cut at `2 * length` steps.
#[derive(Clone, Debug)]
pub struct Chain {
    length: usize,
    pos: usize,
    t: usize,
    done: bool,
}

impl Chain {
    pub fn new(length: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidConfig("chain needs at least two cells".into()));
        }
        Ok(Self {
            length,
            pos: 0,
            t: 0,
            done: false,
        })
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}

impl Environment for Chain {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn state_dim(&self) -> usize {
        self.length
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        2 * self.length
    }

    fn reset(&mut self) -> Vec<f64> {
        (self.pos, self.t, self.done) = (0, 0, false);
        one_hot(self.length, 0)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 2)?;
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        self.pos = if action == RIGHT {
            self.pos + 1
        } else {
            self.pos.saturating_sub(1)
        };
        self.t += 1;
        let reached = self.pos == self.length - 1;
        self.done = reached || self.t == self.horizon();
        Ok(Step {
            reward: if reached { 1.0 } else { 0.0 },
            state: if self.done {
                vec![0.0; self.length]
            } else {
                one_hot(self.length, self.pos)
            },
            terminal: self.done,
        })
    }

    fn optimal_return(&self) -> f64 {
        1.0
    }
}
