use super::replay::ReplayBuffer;
use crate::bandit::argmax_random_tie;
use crate::enn::{evaluation_indices, flops_per_forward, EnnConfig, EnnParams, EpistemicIndex, Objective, PriorCalibration, Trainer};
use crate::envs::Environment;
use crate::numerics::{AdamConfig, Matrix, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Per-transition data loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// `(f(s, z)_a - r - γ max_a' f_target(s', z)_a')²`.
    Td,
    /// Reward read as a class label of a two-output ENN (one-step problems).
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub index_batch: usize,
    /// Gradient steps between target-network copies.
    pub target_period: u64,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub replay_capacity: usize,
    /// Random-policy steps used to standardise prior outputs; 0 disables.
    pub calibration_steps: usize,
    pub loss: LossKind,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 128,
            index_batch: 20,
            target_period: 100,
            lambda: 1.0,
            adam: AdamConfig::default(),
            replay_capacity: 10_000,
            calibration_steps: 100,
            loss: LossKind::Td,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("γ = {} outside [0, 1]", self.gamma)));
        }
        if self.batch_size == 0 || self.index_batch == 0 || self.target_period == 0 || self.replay_capacity == 0 {
            return Err(Error::InvalidConfig("batch sizes, target period and capacity must be positive".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!("λ = {} must be non-negative", self.lambda)));
        }
        Ok(())
    }
}

/// Outcome of fitting the prior correction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub calibration: PriorCalibration,
    /// True when the observed variance was degenerate and the identity
    /// correction was kept.
    pub fallback: bool,
}

/// Runs a uniform-random policy for `steps` steps (resetting at episode
/// ends) and standardises the prior outputs of `enn` over the visited
/// states. Variants without a prior are left untouched.
pub fn calibrate_prior_scale(
    env: &mut dyn Environment,
    enn: &mut EnnParams,
    steps: usize,
    rng: &mut Rng,
) -> Result<Calibration> {
    if steps == 0 {
        return Err(Error::InvalidConfig("calibration needs at least one step".into()));
    }
    let mut states = Vec::with_capacity(steps);
    let mut s = env.reset();
    for _ in 0..steps {
        states.push(s.clone());
        let step = env.step(rng.below(env.num_actions()))?;
        s = if step.terminal { env.reset() } else { step.state };
    }
    let x = Matrix::from_rows(&states)?;
    let zs = evaluation_indices(&enn.reference(), 100, rng);
    let fitted = enn.fit_prior_calibration(&x, &zs)?;
    Ok(Calibration {
        calibration: enn.calibration(),
        fallback: enn.config().variant.has_prior() && !fitted,
    })
}

/// Online and target ENNs, optimiser, replay and the current episode index.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub online: EnnParams,
    pub target: EnnParams,
    pub trainer: Trainer,
    pub replay: ReplayBuffer<Transition>,
    pub grad_steps: u64,
    pub episode_index: Option<EpistemicIndex>,
}

impl AgentState {
    pub fn new(enn: EnnParams, config: &DqnConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            target: enn.clone(),
            trainer: Trainer::new(&enn, config.adam, config.lambda),
            online: enn,
            replay: ReplayBuffer::new(config.replay_capacity)?,
            grad_steps: 0,
            episode_index: None,
        })
    }
}

/// Inputs, actions and per-index regression targets for a TD minibatch.
pub(crate) fn td_batch(
    target: &EnnParams,
    batch: &[&Transition],
    zs: &[EpistemicIndex],
    gamma: f64,
) -> Result<(Matrix, Vec<usize>, Vec<Vec<f64>>)> {
    let x = Matrix::from_rows(&batch.iter().map(|d| &d.state[..]).collect::<Vec<_>>())?;
    let next = Matrix::from_rows(&batch.iter().map(|d| &d.next_state[..]).collect::<Vec<_>>())?;
    let actions = batch.iter().map(|d| d.action).collect();
    let boot = if gamma > 0.0 {
        Some(target.forward_multi(&next, zs)?)
    } else {
        None
    };
    let targets = (0..zs.len())
        .map(|k| {
            batch
                .iter()
                .enumerate()
                .map(|(n, d)| {
                    let future = match (&boot, d.terminal) {
                        (Some(q), false) => q[k].row(n).iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        _ => 0.0,
                    };
                    d.reward + gamma * future
                })
                .collect()
        })
        .collect();
    Ok((x, actions, targets))
}

/// Squared TD error of one transition under index `z`. No gradient flows
/// through the target network.
pub fn td_loss(d: &Transition, z: &EpistemicIndex, online: &EnnParams, target: &EnnParams, gamma: f64) -> Result<f64> {
    let (_, _, targets) = td_batch(target, &[d], std::slice::from_ref(z), gamma)?;
    let q = online.forward(&d.state, z)?;
    let a = *q.get(d.action).ok_or(Error::InvalidAction {
        action: d.action,
        count: q.len(),
    })?;
    Ok((a - targets[0][0]).powi(2))
}

/// One Adam step on a replay minibatch and index batch. Copies the online
/// network into the target every `target_period` steps.
pub fn batch_update(state: &mut AgentState, config: &DqnConfig, rng: &mut Rng) -> Result<f64> {
    let batch = state.replay.sample(config.batch_size, rng)?;
    let zs = state.online.reference().sample_many(config.index_batch, rng);
    let n = state.replay.len();
    let loss = match config.loss {
        LossKind::Td => {
            let (x, actions, targets) = td_batch(&state.target, &batch, &zs, config.gamma)?;
            let obj = Objective::Quadratic {
                actions: &actions,
                targets: &targets,
            };
            state.trainer.step(&mut state.online, &x, &zs, &obj, n)?
        }
        LossKind::CrossEntropy => {
            let x = Matrix::from_rows(&batch.iter().map(|d| &d.state[..]).collect::<Vec<_>>())?;
            let labels: Vec<usize> = batch.iter().map(|d| (d.reward > 0.5) as usize).collect();
            let obj = Objective::CrossEntropy { labels: &labels };
            state.trainer.step(&mut state.online, &x, &zs, &obj, n)?
        }
    };
    state.grad_steps += 1;
    if state.grad_steps.is_multiple_of(config.target_period) {
        state.target.copy_learnable_from(&state.online);
    }
    Ok(loss)
}

/// Greedy action under `f(s, z)` with uniform tie-breaking.
pub fn select_action(online: &EnnParams, s: &[f64], z: &EpistemicIndex, rng: &mut Rng) -> Result<usize> {
    let q = online.forward(s, z)?;
    Ok(argmax_random_tie(&q, rng))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOutcome {
    /// Undiscounted return.
    pub ret: f64,
    pub steps: usize,
    /// Stopped at ten times the horizon without reaching a terminal state.
    pub truncated: bool,
}

/// One episode with a single index drawn at its start and one update per
/// environment step.
pub fn run_episode(state: &mut AgentState, env: &mut dyn Environment, config: &DqnConfig, rng: &mut Rng) -> Result<EpisodeOutcome> {
    let z = state.online.reference().sample(rng);
    state.episode_index = Some(z.clone());
    let cap = 10 * env.horizon();
    let mut s = env.reset();
    let mut out = EpisodeOutcome {
        ret: 0.0,
        steps: 0,
        truncated: false,
    };
    loop {
        let a = select_action(&state.online, &s, &z, rng)?;
        let step = env.step(a)?;
        if !step.reward.is_finite() {
            return Err(Error::NonFinite("reward".into()));
        }
        out.ret += step.reward;
        out.steps += 1;
        state.replay.push(Transition {
            state: s,
            action: a,
            reward: step.reward,
            next_state: step.state.clone(),
            terminal: step.terminal,
        });
        batch_update(state, config, rng)?;
        if step.terminal {
            return Ok(out);
        }
        if out.steps >= cap {
            out.truncated = true;
            return Ok(out);
        }
        s = step.state;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RlRun {
    pub episodes: Vec<EpisodeOutcome>,
    pub calibration: Calibration,
    pub forward_flops: usize,
    pub learnable_params: usize,
}

/// Calibrates priors on `env`, then trains for `episodes` episodes.
pub fn run_rl(env: &mut dyn Environment, config: &EnnConfig, dqn: &DqnConfig, episodes: usize, seed: u64) -> Result<RlRun> {
    dqn.validate()?;
    if config.input_dim != env.state_dim() || config.outputs != env.num_actions() {
        return Err(Error::Shape(format!(
            "ENN maps {} -> {}, environment has {} state features and {} actions",
            config.input_dim,
            config.outputs,
            env.state_dim(),
            env.num_actions()
        )));
    }
    let mut rng = Rng::new(seed).child("rl-agent").child(config.variant.name());
    let mut enn = EnnParams::init(config, &mut rng.child("init"))?;
    let calibration = if dqn.calibration_steps > 0 {
        calibrate_prior_scale(env, &mut enn, dqn.calibration_steps, &mut rng.child("calibration"))?
    } else {
        Calibration {
            calibration: PriorCalibration::default(),
            fallback: false,
        }
    };
    let mut state = AgentState::new(enn, dqn)?;
    let outcomes = (0..episodes)
        .map(|_| run_episode(&mut state, env, dqn, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(RlRun {
        episodes: outcomes,
        calibration,
        forward_flops: flops_per_forward(config)?,
        learnable_params: state.online.learnable_count(),
    })
}
