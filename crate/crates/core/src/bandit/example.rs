//! The one-unknown-action problem: `A - 1` coin-flip actions and one action
//! whose reward is a hidden bit. An agent that samples each action's reward
//! independently has to stumble on the unknown action, while sampling the
//! bit itself resolves it in about two pulls.

use super::env::{argmax_random_tie, BanditEnv, OneUnknownActionEnv};
use super::neural::{run_bandit, BanditAgent, BanditRunConfig, RegretTrace};
use crate::enn::EnnConfig;
use crate::numerics::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum OneUnknownAgent {
    /// Thompson sampling from the exact posterior over the hidden bit.
    ExactTs,
    /// Samples every action's reward independently from its posterior
    /// marginal. Ties go to the higher posterior mean, then uniformly.
    MarginalTs,
    /// ENN trained online on one-hot action features.
    EnnTs(Box<(EnnConfig, BanditRunConfig)>),
}

impl OneUnknownAgent {
    pub fn name(&self) -> String {
        match self {
            OneUnknownAgent::ExactTs => "exact_ts".into(),
            OneUnknownAgent::MarginalTs => "marginal_ts".into(),
            OneUnknownAgent::EnnTs(parts) => format!("enn_ts_{}", parts.0.variant.name()),
        }
    }
}

/// Posterior over the hidden bit: undetermined until the unknown action is
/// pulled once, then a point mass.
fn posterior_mean(revealed: Option<bool>) -> f64 {
    revealed.map_or(0.5, |b| b as u8 as f64)
}

fn exact_action(env: &OneUnknownActionEnv, revealed: Option<bool>, rng: &mut Rng) -> usize {
    let bit = revealed.unwrap_or_else(|| rng.bernoulli(0.5));
    let mut values = vec![0.5; env.num_actions()];
    values[env.unknown_action()] = bit as u8 as f64;
    argmax_random_tie(&values, rng)
}

fn marginal_action(env: &OneUnknownActionEnv, revealed: Option<bool>, rng: &mut Rng) -> usize {
    let n = env.num_actions();
    let means: Vec<f64> = (0..n)
        .map(|a| if a == env.unknown_action() { posterior_mean(revealed) } else { 0.5 })
        .collect();
    let samples: Vec<f64> = means.iter().map(|&m| rng.bernoulli(m) as u8 as f64).collect();
    let top = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keyed: Vec<f64> = (0..n)
        .map(|a| if samples[a] == top { means[a] } else { f64::NEG_INFINITY })
        .collect();
    argmax_random_tie(&keyed, rng)
}

fn one_episode(agent: &OneUnknownAgent, actions: usize, steps: usize, seed: u64) -> Result<RegretTrace> {
    let env = OneUnknownActionEnv::sample(actions, &mut Rng::new(seed).child("one-unknown-bit"))?;
    let mut rng = Rng::new(seed).child("one-unknown-policy");
    let mut trace = RegretTrace::new(agent.name(), seed);
    match agent {
        OneUnknownAgent::ExactTs | OneUnknownAgent::MarginalTs => {
            let mut revealed = None;
            for _ in 0..steps {
                let a = if *agent == OneUnknownAgent::ExactTs {
                    exact_action(&env, revealed, &mut rng)
                } else {
                    marginal_action(&env, revealed, &mut rng)
                };
                let r = env.pull(a, &mut rng)?;
                if a == env.unknown_action() {
                    revealed = Some(r > 0.5);
                }
                trace.push(env.regret(a));
            }
        }
        OneUnknownAgent::EnnTs(parts) => {
            let (config, run) = (&parts.0, &parts.1);
            if config.input_dim != actions {
                return Err(Error::Shape(format!("ENN input must be the action count {actions}")));
            }
            let mut bandit = BanditAgent::new(config, run, &mut rng.child("init"))?;
            run_bandit(&env, &mut bandit, steps, true, &mut trace, &mut rng)?;
        }
    }
    Ok(trace)
}

/// One regret trace per seed; each seed draws its own hidden bit.
pub fn run_one_unknown(
    agent: &OneUnknownAgent,
    actions: usize,
    steps: usize,
    seeds: std::ops::Range<u64>,
) -> Result<Vec<RegretTrace>> {
    if actions < 2 {
        return Err(Error::InvalidConfig("need at least two actions".into()));
    }
    seeds.map(|s| one_episode(agent, actions, steps, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_total(agent: &OneUnknownAgent, actions: usize, episodes: u64) -> f64 {
        let traces = run_one_unknown(agent, actions, 1000, 0..episodes).unwrap();
        traces.iter().map(RegretTrace::total).sum::<f64>() / episodes as f64
    }

    #[test]
    fn exact_ts_collapses_after_one_pull() {
        for seed in 0..200 {
            let trace = run_one_unknown(&OneUnknownAgent::ExactTs, 6, 200, seed..seed + 1).unwrap().remove(0);
            let env = OneUnknownActionEnv::sample(6, &mut Rng::new(seed).child("one-unknown-bit")).unwrap();
            // Regret is only paid before the unknown action is first pulled
            // (bit 1) or on that pull itself (bit 0).
            let last = trace.regret.iter().rposition(|&r| r > 0.0);
            if let Some(t) = last {
                assert!(trace.regret[t + 1..].iter().all(|&r| r == 0.0));
                if !env.bit() {
                    assert_eq!(trace.total(), 0.5);
                }
            }
        }
    }

    #[test]
    fn exact_posterior_update() {
        assert_eq!(posterior_mean(None), 0.5);
        assert_eq!(posterior_mean(Some(true)), 1.0);
        assert_eq!(posterior_mean(Some(false)), 0.0);
        let env = OneUnknownActionEnv::new(4, true).unwrap();
        let mut rng = Rng::new(0);
        assert!((0..100).all(|_| exact_action(&env, Some(true), &mut rng) == 3));
        assert!((0..100).all(|_| exact_action(&env, Some(false), &mut rng) != 3));
        assert!((0..100).all(|_| marginal_action(&env, Some(false), &mut rng) != 3));
    }

    #[test]
    fn exact_regret_is_constant_and_marginal_grows() {
        let exact: Vec<f64> = [5, 10, 20].iter().map(|&a| mean_total(&OneUnknownAgent::ExactTs, a, 2000)).collect();
        for e in &exact {
            assert!((e - 0.5).abs() < 0.06, "{exact:?}");
        }
        let m10 = mean_total(&OneUnknownAgent::MarginalTs, 10, 2000);
        let m20 = mean_total(&OneUnknownAgent::MarginalTs, 20, 2000);
        assert!((1.8..2.2).contains(&(m20 / m10)), "{m10} {m20}");
    }

    #[test]
    fn ratio_grows_with_action_count() {
        let ratio = |a| mean_total(&OneUnknownAgent::MarginalTs, a, 1000) / mean_total(&OneUnknownAgent::ExactTs, a, 1000);
        let r: Vec<f64> = [5, 10, 20].into_iter().map(ratio).collect();
        assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
    }
}
