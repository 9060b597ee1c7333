//! One run of each experiment kind: a single agent on a single seed,
//! producing CSV rows.

use enn_core::bandit::{run_neural_bandit, run_one_unknown, BanditRunConfig, OneUnknownAgent};
use enn_core::dqn::{run_rl, DqnConfig, LossKind};
use enn_core::envs::{Chain, DeepSea, Environment};
use enn_core::numerics::Rng;
use enn_core::testbed::{evaluate_nll, generate_problem, train_supervised, TrainConfig};
use enn_core::Error;

use crate::agents::{adam, enn_config};
use crate::config::{Command, ExperimentConfig, RlEnv};
use crate::error::{HarnessError, Result};

/// One CSV row together with its merge key.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub agent: String,
    pub seed: u64,
    pub step: u64,
    pub values: Vec<String>,
}

/// Column names of the CSV a command writes.
pub fn header(command: Command) -> &'static [&'static str] {
    match command {
        Command::Testbed => &["agent", "config_hash", "seed", "problem", "tau", "nll"],
        Command::Bandit => &[
            "agent",
            "config_hash",
            "seed",
            "step",
            "regret",
            "cum_regret",
            "forward_flops",
            "learnable_params",
        ],
        Command::Rl => &[
            "agent",
            "config_hash",
            "seed",
            "episode",
            "return",
            "cum_return",
            "solved_flag",
            "forward_flops",
            "learnable_params",
            "optimal_return",
        ],
        Command::Example1 => &["agent", "config_hash", "seed", "actions", "total_regret"],
        Command::Correlate => &["nll", "method", "estimate", "p05", "p95", "points"],
        Command::ComputeReport => &[
            "agent",
            "config_hash",
            "learnable_params",
            "stored_params",
            "forward_flops",
            "ms_per_1000_updates",
        ],
    }
}

fn unknown_agent(agent: &str) -> HarnessError {
    HarnessError::Core(Error::InvalidConfig(format!("`{agent}` is not an ENN agent")))
}

/// Training steps for `train_epochs` passes over the data.
pub fn testbed_train_config(cfg: &ExperimentConfig) -> TrainConfig {
    let n = &cfg.net;
    TrainConfig {
        steps: (cfg.train_epochs * cfg.num_train).div_ceil(n.batch_size),
        batch_size: n.batch_size,
        index_batch: n.index_batch,
        lambda: n.lambda,
        adam: adam(n),
    }
}

pub fn bandit_run_config(cfg: &ExperimentConfig, input_dim: usize) -> BanditRunConfig {
    let n = &cfg.net;
    BanditRunConfig {
        steps: cfg.steps,
        num_actions: cfg.actions,
        input_dim,
        replay_capacity: cfg.replay_capacity,
        batch_size: n.batch_size,
        index_batch: n.index_batch,
        lambda: n.lambda,
        adam: adam(n),
    }
}

pub fn dqn_config(cfg: &ExperimentConfig) -> DqnConfig {
    let n = &cfg.net;
    DqnConfig {
        gamma: cfg.gamma,
        batch_size: n.batch_size,
        index_batch: n.index_batch.unwrap_or(20),
        target_period: cfg.target_period as u64,
        lambda: n.lambda,
        adam: adam(n),
        replay_capacity: cfg.replay_capacity,
        calibration_steps: cfg.calibration_steps,
        loss: LossKind::Td,
    }
}

pub fn make_env(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match cfg.env {
        RlEnv::DeepSea => Box::new(DeepSea::new(cfg.size, seed, cfg.flip_mask)?),
        RlEnv::Chain => Box::new(Chain::new(cfg.size)?),
    })
}

/// Runs `agent` on `seed` for the config's command.
pub fn run_job(cfg: &ExperimentConfig, agent: &str, seed: u64) -> Result<Vec<Row>> {
    let hash = cfg.agent_hash(agent);
    let row = |step: u64, values: Vec<String>| Row {
        agent: agent.to_string(),
        seed,
        step,
        values: [vec![agent.to_string(), hash.clone(), seed.to_string()], values].concat(),
    };
    match cfg.command {
        Command::Testbed => {
            let config = enn_config(agent, &cfg.net, cfg.dim, 2).ok_or_else(|| unknown_agent(agent))?;
            let rng = Rng::new(seed).child("testbed-agent").child(agent);
            let mut rows = Vec::new();
            for p in 0..cfg.problems {
                let problem_seed = Rng::new(seed).child("testbed-problem").child_idx(p as u64).key();
                let problem = generate_problem(problem_seed, cfg.dim, cfg.num_train)?;
                let rng = rng.child_idx(p as u64);
                let enn = train_supervised(&config, &problem, &testbed_train_config(cfg), &mut rng.child("train"))?;
                let name = format!("d{}-n{}-p{p}", cfg.dim, cfg.num_train);
                for &tau in &cfg.taus {
                    let mut eval_rng = rng.child("eval").child_idx(tau as u64);
                    let report = evaluate_nll(&enn, &problem, tau, cfg.eval_batches, cfg.index_samples, &mut eval_rng)?;
                    let step = (p * 16 + tau) as u64;
                    rows.push(row(step, vec![name.clone(), tau.to_string(), report.nll.to_string()]));
                }
            }
            Ok(rows)
        }
        Command::Bandit => {
            let config = enn_config(agent, &cfg.net, cfg.dim, 2).ok_or_else(|| unknown_agent(agent))?;
            let run = run_neural_bandit(&bandit_run_config(cfg, cfg.dim), &config, seed)?;
            let (flops, params) = (run.forward_flops.to_string(), run.learnable_params.to_string());
            Ok(run
                .trace
                .regret
                .iter()
                .zip(&run.trace.cumulative)
                .enumerate()
                .map(|(t, (r, c))| {
                    row(
                        t as u64 + 1,
                        vec![(t + 1).to_string(), r.to_string(), c.to_string(), flops.clone(), params.clone()],
                    )
                })
                .collect())
        }
        Command::Rl => {
            let mut env = make_env(cfg, seed)?;
            let config =
                enn_config(agent, &cfg.net, env.state_dim(), env.num_actions()).ok_or_else(|| unknown_agent(agent))?;
            let optimal = env.optimal_return();
            let run = run_rl(env.as_mut(), &config, &dqn_config(cfg), cfg.episodes, seed)?;
            let (flops, params) = (run.forward_flops.to_string(), run.learnable_params.to_string());
            let mut total = 0.0;
            Ok(run
                .episodes
                .iter()
                .enumerate()
                .map(|(e, outcome)| {
                    total += outcome.ret;
                    let solved = outcome.ret >= optimal - 1e-9;
                    row(
                        e as u64 + 1,
                        vec![
                            (e + 1).to_string(),
                            outcome.ret.to_string(),
                            total.to_string(),
                            (solved as u8).to_string(),
                            flops.clone(),
                            params.clone(),
                            optimal.to_string(),
                        ],
                    )
                })
                .collect())
        }
        Command::Example1 => {
            let kind = match agent {
                "exact_ts" => OneUnknownAgent::ExactTs,
                "marginal_ts" => OneUnknownAgent::MarginalTs,
                _ => {
                    let config = enn_config(agent, &cfg.net, cfg.actions, 2).ok_or_else(|| unknown_agent(agent))?;
                    OneUnknownAgent::EnnTs(Box::new((config, bandit_run_config(cfg, cfg.actions))))
                }
            };
            let trace = run_one_unknown(&kind, cfg.actions, cfg.steps, seed..seed + 1)?.remove(0);
            Ok(vec![row(0, vec![cfg.actions.to_string(), trace.total().to_string()])])
        }
        Command::Correlate | Command::ComputeReport => Err(HarnessError::Data(format!(
            "`{}` does not run per-seed jobs",
            cfg.command.name()
        ))),
    }
}
