use crate::numerics::{Matrix, Rng};
use crate::testbed::GenerativeModel;
use crate::{Error, Result};

/// Index of a maximum, chosen uniformly among exact ties. The generator is
/// only consulted when there is more than one maximiser.
pub fn argmax_random_tie(values: &[f64], rng: &mut Rng) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => rng.below(values.len()),
        1 => ties[0],
        n => ties[rng.below(n)],
    }
}

/// Bandit with Bernoulli rewards and one feature vector per action.
pub trait BanditEnv {
    /// Row `a` is the input describing action `a`.
    fn features(&self) -> &Matrix;
    /// Expected reward of every action.
    fn expected_rewards(&self) -> &[f64];
    fn pull(&self, action: usize, rng: &mut Rng) -> Result<f64> {
        let p = self.expected_rewards();
        if action >= p.len() {
            return Err(Error::InvalidAction {
                action,
                count: p.len(),
            });
        }
        Ok(if rng.bernoulli(p[action]) { 1.0 } else { 0.0 })
    }
    fn num_actions(&self) -> usize {
        self.expected_rewards().len()
    }
    fn best_reward(&self) -> f64 {
        self.expected_rewards().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    /// `max_a p(a) - p(action)`.
    fn regret(&self, action: usize) -> f64 {
        self.best_reward() - self.expected_rewards()[action]
    }
}

/// `A` actions; the first `A - 1` pay Bernoulli(1/2) and the last pays a
/// hidden bit `b` deterministically.
#[derive(Clone, Debug)]
pub struct OneUnknownActionEnv {
    features: Matrix,
    rewards: Vec<f64>,
    bit: bool,
}

impl OneUnknownActionEnv {
    pub fn new(actions: usize, bit: bool) -> Result<Self> {
        if actions < 2 {
            return Err(Error::InvalidConfig("need at least two actions".into()));
        }
        let mut features = Matrix::zeros(actions, actions);
        (0..actions).for_each(|a| features.set(a, a, 1.0));
        let mut rewards = vec![0.5; actions];
        rewards[actions - 1] = if bit { 1.0 } else { 0.0 };
        Ok(Self { features, rewards, bit })
    }

    /// Draws the hidden bit equiprobably.
    pub fn sample(actions: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(actions, rng.bernoulli(0.5))
    }

    pub fn bit(&self) -> bool {
        self.bit
    }

    pub fn unknown_action(&self) -> usize {
        self.rewards.len() - 1
    }
}

impl BanditEnv for OneUnknownActionEnv {
    fn features(&self) -> &Matrix {
        &self.features
    }

    fn expected_rewards(&self) -> &[f64] {
        &self.rewards
    }
}

/// Actions are standard-normal vectors; the reward of an action is a draw
/// from the class-1 probability of a random generative network.
#[derive(Clone, Debug)]
pub struct NeuralBanditEnv {
    features: Matrix,
    model: GenerativeModel,
    rewards: Vec<f64>,
}

impl NeuralBanditEnv {
    pub fn new(actions: usize, dim: usize, seed: u64) -> Result<Self> {
        if actions == 0 || dim == 0 {
            return Err(Error::InvalidConfig("action count and dimension must be positive".into()));
        }
        let mut rng = Rng::new(seed).child("bandit-actions");
        let features = Matrix::from_vec(actions, dim, (0..actions * dim).map(|_| rng.normal()).collect())?;
        Self::from_parts(features, GenerativeModel::new(dim, seed)?)
    }

    pub fn from_parts(features: Matrix, model: GenerativeModel) -> Result<Self> {
        if features.cols() != model.input_dim() || model.classes() != 2 {
            return Err(Error::Shape("action features do not match the two-class model".into()));
        }
        let rewards = model.probs(&features).iter_rows().map(|r| r[1]).collect();
        Ok(Self {
            features,
            model,
            rewards,
        })
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.model
    }
}

impl BanditEnv for NeuralBanditEnv {
    fn features(&self) -> &Matrix {
        &self.features
    }

    fn expected_rewards(&self) -> &[f64] {
        &self.rewards
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_are_broken_uniformly() {
        let mut rng = Rng::new(0);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[argmax_random_tie(&[1.0, 3.0, 3.0, 3.0], &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            assert!((*c as f64 / 40_000.0 - 1.0 / 3.0).abs() < 0.01);
        }
        assert_eq!(argmax_random_tie(&[0.1, 0.9], &mut rng), 1);
    }

    #[test]
    fn one_unknown_rewards() {
        let env = OneUnknownActionEnv::new(5, true).unwrap();
        assert_eq!(env.expected_rewards(), &[0.5, 0.5, 0.5, 0.5, 1.0]);
        assert_eq!(env.best_reward(), 1.0);
        let mut rng = Rng::new(1);
        assert!((0..100).all(|_| env.pull(4, &mut rng).unwrap() == 1.0));
        let zero = OneUnknownActionEnv::new(5, false).unwrap();
        assert_eq!(zero.best_reward(), 0.5);
        assert!((0..100).all(|_| zero.pull(4, &mut rng).unwrap() == 0.0));
        assert!(zero.pull(5, &mut rng).is_err());
        let ones = (0..20_000).filter(|_| zero.pull(0, &mut rng).unwrap() == 1.0).count();
        assert!((ones as f64 / 20_000.0 - 0.5).abs() < 0.02);
        let bits = (0..10_000).filter(|_| OneUnknownActionEnv::sample(3, &mut rng).unwrap().bit()).count();
        assert!((bits as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn neural_bandit_probabilities_are_valid() {
        let env = NeuralBanditEnv::new(100, 10, 3).unwrap();
        assert_eq!(env.num_actions(), 100);
        assert!(env.expected_rewards().iter().all(|p| (0.0..=1.0).contains(p)));
        let again = NeuralBanditEnv::new(100, 10, 3).unwrap();
        assert_eq!(env.expected_rewards(), again.expected_rewards());
        assert!((0..100).all(|a| env.regret(a) >= 0.0));
    }
}
