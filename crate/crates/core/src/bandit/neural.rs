use super::env::{argmax_random_tie, BanditEnv, NeuralBanditEnv};
use crate::dqn::ReplayBuffer;
use crate::enn::{flops_per_forward, EnnConfig, EnnParams, EpistemicIndex, Objective, Trainer};
use crate::numerics::{softmax, AdamConfig, Matrix, Rng};
use crate::testbed::default_index_batch;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BanditRunConfig {
    pub steps: usize,
    pub num_actions: usize,
    pub input_dim: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// `None` picks the per-variant default (5 for the epinet, else 20).
    pub index_batch: Option<usize>,
    pub lambda: f64,
    pub adam: AdamConfig,
}

impl Default for BanditRunConfig {
    fn default() -> Self {
        Self {
            steps: 50_000,
            num_actions: 1000,
            input_dim: 100,
            replay_capacity: 10_000,
            batch_size: 128,
            index_batch: None,
            lambda: 1.0,
            adam: AdamConfig::default(),
        }
    }
}

impl BanditRunConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.steps,
            self.num_actions,
            self.input_dim,
            self.replay_capacity,
            self.batch_size,
            self.index_batch.unwrap_or(1),
        ];
        if fields.contains(&0) {
            return Err(Error::InvalidConfig("bandit run sizes must be positive".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!("λ = {} must be non-negative", self.lambda)));
        }
        Ok(())
    }
}

/// Per-step expected regret of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub agent: String,
    pub seed: u64,
    pub regret: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn new(agent: impl Into<String>, seed: u64) -> Self {
        Self {
            agent: agent.into(),
            seed,
            regret: vec![],
            cumulative: vec![],
        }
    }

    pub fn push(&mut self, regret: f64) {
        let total = self.total() + regret;
        self.regret.push(regret);
        self.cumulative.push(total);
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Mean per-step regret over `range`.
    pub fn window_mean(&self, range: std::ops::Range<usize>) -> f64 {
        let w = &self.regret[range];
        w.iter().sum::<f64>() / w.len() as f64
    }
}

/// Expected reward of every row of `features` under `f(·, z)`: the
/// probability of class 1.
fn predicted_rewards(enn: &EnnParams, features: &Matrix, z: &EpistemicIndex) -> Result<Vec<f64>> {
    let out = enn.forward_batch(features, z)?;
    out.iter_rows().map(|r| Ok(softmax(r)?[1])).collect()
}

/// Samples one index and acts greedily on the ENN's predicted rewards.
pub fn ts_action(enn: &EnnParams, features: &Matrix, rng: &mut Rng) -> Result<(usize, EpistemicIndex)> {
    let z = enn.reference().sample(rng);
    let values = predicted_rewards(enn, features, &z)?;
    Ok((argmax_random_tie(&values, rng), z))
}

/// [`ts_action`] followed by a reward draw from `env`.
pub fn ts_step(enn: &EnnParams, env: &impl BanditEnv, rng: &mut Rng) -> Result<(usize, f64, EpistemicIndex)> {
    let (a, z) = ts_action(enn, env.features(), rng)?;
    let r = env.pull(a, rng)?;
    Ok((a, r, z))
}

/// ENN, optimiser and replay of observed `(action, reward)` pairs.
#[derive(Clone, Debug)]
pub struct BanditAgent {
    pub enn: EnnParams,
    pub trainer: Trainer,
    pub replay: ReplayBuffer<(usize, usize)>,
    pub batch_size: usize,
    pub index_batch: usize,
}

impl BanditAgent {
    pub fn new(config: &EnnConfig, run: &BanditRunConfig, rng: &mut Rng) -> Result<Self> {
        run.validate()?;
        if config.outputs != 2 {
            return Err(Error::InvalidConfig("bandit ENNs predict two reward classes".into()));
        }
        let enn = EnnParams::init(config, rng)?;
        Self::from_params(enn, run)
    }

    pub fn from_params(enn: EnnParams, run: &BanditRunConfig) -> Result<Self> {
        Ok(Self {
            trainer: Trainer::new(&enn, run.adam, run.lambda),
            index_batch: run.index_batch.unwrap_or_else(|| default_index_batch(&enn.config().variant)),
            enn,
            replay: ReplayBuffer::new(run.replay_capacity)?,
            batch_size: run.batch_size,
        })
    }

    pub fn observe(&mut self, action: usize, reward: f64) {
        self.replay.push((action, (reward > 0.5) as usize));
    }

    /// One gradient step on a replay minibatch; rewards are class labels.
    pub fn update(&mut self, features: &Matrix, rng: &mut Rng) -> Result<f64> {
        let batch = self.replay.sample(self.batch_size, rng)?;
        let mut x = Matrix::zeros(batch.len(), features.cols());
        let mut labels = Vec::with_capacity(batch.len());
        for (r, &&(a, y)) in batch.iter().enumerate() {
            x.row_mut(r).copy_from_slice(features.row(a));
            labels.push(y);
        }
        let zs = self.enn.reference().sample_many(self.index_batch, rng);
        let n = self.replay.len();
        self.trainer
            .step(&mut self.enn, &x, &zs, &Objective::CrossEntropy { labels: &labels }, n)
    }
}

/// Runs `steps` rounds of act, observe and (if `learn`) one update.
pub fn run_bandit(
    env: &impl BanditEnv,
    agent: &mut BanditAgent,
    steps: usize,
    learn: bool,
    trace: &mut RegretTrace,
    rng: &mut Rng,
) -> Result<()> {
    for _ in 0..steps {
        let (a, r, _) = ts_step(&agent.enn, env, rng)?;
        trace.push(env.regret(a));
        agent.observe(a, r);
        if learn {
            agent.update(env.features(), rng)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BanditRun {
    pub trace: RegretTrace,
    pub forward_flops: usize,
    pub learnable_params: usize,
}

/// One neural-bandit run. The environment depends only on `seed`, so every
/// agent faces the same problem for a given seed.
pub fn run_neural_bandit(run: &BanditRunConfig, config: &EnnConfig, seed: u64) -> Result<BanditRun> {
    run.validate()?;
    if config.input_dim != run.input_dim {
        return Err(Error::Shape(format!(
            "ENN input {} does not match action dimension {}",
            config.input_dim, run.input_dim
        )));
    }
    let env = NeuralBanditEnv::new(run.num_actions, run.input_dim, seed)?;
    let mut rng = Rng::new(seed).child("bandit-agent").child(config.variant.name());
    let mut agent = BanditAgent::new(config, run, &mut rng.child("init"))?;
    let mut trace = RegretTrace::new(config.variant.name(), seed);
    run_bandit(&env, &mut agent, run.steps, true, &mut trace, &mut rng)?;
    Ok(BanditRun {
        trace,
        forward_flops: flops_per_forward(config)?,
        learnable_params: agent.enn.learnable_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enn::Variant;
    use crate::numerics::MlpShape;

    fn small_run(steps: usize) -> BanditRunConfig {
        BanditRunConfig {
            steps,
            num_actions: 10,
            input_dim: 2,
            ..BanditRunConfig::default()
        }
    }

    #[test]
    fn equal_predictions_give_uniform_actions() {
        let config = EnnConfig::new(3, vec![4], 2, Variant::Mlp);
        let enn = EnnParams::from_parts(&config, vec![0.0; config.base_shape().unwrap().param_count()], vec![]).unwrap();
        let features = Matrix::from_vec(5, 3, (0..15).map(|i| i as f64).collect()).unwrap();
        let mut rng = Rng::new(0);
        let mut counts = [0usize; 5];
        for _ in 0..10_000 {
            counts[ts_action(&enn, &features, &mut rng).unwrap().0] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e4 - 0.2).abs() < 0.02);
        }
    }

    #[test]
    fn dominant_prediction_is_always_chosen() {
        // Identity features; the output layer favours class 1 for action 0.
        let config = EnnConfig::new(2, vec![2], 2, Variant::Ensemble { size: 3 });
        let shape = MlpShape::new(vec![2, 2, 2]).unwrap();
        let mut p = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        p.extend([0.0, 5.0, 0.0, -5.0, 0.0, 0.0]);
        assert_eq!(p.len(), shape.param_count());
        let enn = EnnParams::from_parts(&config, p.repeat(3), vec![]).unwrap();
        let features = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut rng = Rng::new(1);
        assert!((0..500).all(|_| ts_action(&enn, &features, &mut rng).unwrap().0 == 0));
    }

    #[test]
    fn action_frequencies_follow_particles() {
        // Particle k prefers action k mod 2; with 3 particles, action 0
        // should be picked with probability 2/3.
        let config = EnnConfig::new(2, vec![2], 2, Variant::Ensemble { size: 3 });
        let hidden = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let favour = |a: usize| {
            let mut v = hidden.to_vec();
            let mut out = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            out[2 * a + 1] = 5.0;
            v.extend(out);
            v
        };
        let params = [favour(0), favour(1), favour(0)].concat();
        let enn = EnnParams::from_parts(&config, params, vec![]).unwrap();
        let features = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut rng = Rng::new(2);
        let zeros = (0..20_000).filter(|_| ts_action(&enn, &features, &mut rng).unwrap().0 == 0).count();
        assert!((zeros as f64 / 2e4 - 2.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn oracle_agent_has_zero_regret() {
        let env = NeuralBanditEnv::new(20, 3, 5).unwrap();
        let enn = env.model().as_enn().unwrap();
        let mut agent = BanditAgent::from_params(enn, &small_run(1)).unwrap();
        let mut trace = RegretTrace::new("oracle", 5);
        run_bandit(&env, &mut agent, 300, false, &mut trace, &mut Rng::new(0)).unwrap();
        assert_eq!(trace.total(), 0.0);
    }

    #[test]
    fn regret_is_nonnegative_and_cumulative_monotone() {
        let run = small_run(300);
        let config = EnnConfig::new(2, vec![8, 8], 2, Variant::EnsemblePlus { size: 3, prior_scale: 1.0 });
        let out = run_neural_bandit(&run, &config, 1).unwrap();
        assert_eq!(out.trace.regret.len(), 300);
        assert!(out.trace.regret.iter().all(|&r| r >= 0.0));
        assert!(out.trace.cumulative.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out, run_neural_bandit(&run, &config, 1).unwrap());
    }

    #[test]
    fn regulariser_follows_replay_size() {
        let run = BanditRunConfig {
            replay_capacity: 5,
            lambda: 2.0,
            ..small_run(1)
        };
        let config = EnnConfig::new(2, vec![4], 2, Variant::Mlp);
        let env = NeuralBanditEnv::new(10, 2, 0).unwrap();
        let mut rng = Rng::new(0);
        let mut agent = BanditAgent::new(&config, &run, &mut rng).unwrap();
        for t in 1..=8 {
            let (a, r, _) = ts_step(&agent.enn, &env, &mut rng).unwrap();
            agent.observe(a, r);
            agent.update(env.features(), &mut rng).unwrap();
            assert_eq!(agent.trainer.last_l2(), 2.0 / t.min(5) as f64);
        }
    }

    #[test]
    fn config_checks() {
        assert!(BanditRunConfig { batch_size: 0, ..small_run(1) }.validate().is_err());
        let wrong_dim = EnnConfig::new(3, vec![4], 2, Variant::Mlp);
        assert!(run_neural_bandit(&small_run(1), &wrong_dim, 0).is_err());
        let three = EnnConfig::new(2, vec![4], 3, Variant::Mlp);
        assert!(run_neural_bandit(&small_run(1), &three, 0).is_err());
    }
}
