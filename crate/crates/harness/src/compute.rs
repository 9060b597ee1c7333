//! Per-agent compute cost: parameter counts, multiply-adds per forward pass
//! and measured training time.

use std::time::Instant;

use enn_core::enn::{flops_per_forward, param_count, EnnParams, Objective, Trainer};
use enn_core::numerics::{Matrix, Rng};
use enn_core::testbed::default_index_batch;

use crate::agents::{adam, enn_config};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::Row;

/// Cost of one agent on `dim` inputs and two classes.
#[derive(Clone, Debug, PartialEq)]
pub struct CostRow {
    pub agent: String,
    pub learnable_params: usize,
    pub stored_params: usize,
    pub forward_flops: usize,
    /// Wall-clock milliseconds for 1000 training steps, when measured.
    pub ms_per_1000_updates: Option<f64>,
}

/// Counts for every configured agent; the timing is measured over
/// `cfg.updates` steps when `measure` is set.
pub fn report_compute(cfg: &ExperimentConfig, measure: bool) -> Result<Vec<CostRow>> {
    cfg.agents
        .iter()
        .map(|agent| {
            let config = enn_config(agent, &cfg.net, cfg.dim, 2)
                .ok_or_else(|| HarnessError::Data(format!("`{agent}` is not an ENN agent")))?;
            let params = param_count(&config)?;
            let ms = if measure { Some(time_updates(cfg, agent)?) } else { None };
            Ok(CostRow {
                agent: agent.clone(),
                learnable_params: params.learnable,
                stored_params: params.stored(),
                forward_flops: flops_per_forward(&config)?,
                ms_per_1000_updates: ms,
            })
        })
        .collect()
}

/// Milliseconds per 1000 minibatch steps on random data.
fn time_updates(cfg: &ExperimentConfig, agent: &str) -> Result<f64> {
    let config = enn_config(agent, &cfg.net, cfg.dim, 2).expect("agent checked by caller");
    let mut rng = Rng::new(cfg.seed_base).child("compute").child(agent);
    let mut enn = EnnParams::init(&config, &mut rng.child("init"))?;
    let mut trainer = Trainer::new(&enn, adam(&cfg.net), cfg.net.lambda);
    let reference = enn.reference();
    let index_batch = cfg.net.index_batch.unwrap_or_else(|| default_index_batch(&config.variant));
    let batch = cfg.net.batch_size;
    let data: Vec<f64> = (0..batch * cfg.dim).map(|_| rng.normal()).collect();
    let x = Matrix::from_vec(batch, cfg.dim, data)?;
    let labels: Vec<usize> = (0..batch).map(|_| rng.below(2)).collect();
    let start = Instant::now();
    for _ in 0..cfg.updates {
        let zs = reference.sample_many(index_batch, &mut rng);
        trainer.step(&mut enn, &x, &zs, &Objective::CrossEntropy { labels: &labels }, batch)?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 * 1000.0 / cfg.updates as f64)
}

/// Rows in the compute-report CSV layout. Timings that were not measured
/// are left empty.
pub fn cost_rows(cfg: &ExperimentConfig, costs: &[CostRow]) -> Vec<Row> {
    costs
        .iter()
        .map(|c| Row {
            agent: c.agent.clone(),
            seed: 0,
            step: 0,
            values: vec![
                c.agent.clone(),
                cfg.agent_hash(&c.agent),
                c.learnable_params.to_string(),
                c.stored_params.to_string(),
                c.forward_flops.to_string(),
                c.ms_per_1000_updates.map_or(String::new(), |m| format!("{m:.3}")),
            ],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Command, Setting};

    fn config(pairs: &[(&str, &str)]) -> ExperimentConfig {
        let flags: Vec<Setting> = pairs.iter().map(|(k, v)| Setting::flag(k, *v)).collect();
        ExperimentConfig::resolve(Some(Command::ComputeReport), &[], &flags).unwrap()
    }

    #[test]
    fn large_ensemble_stores_one_mlp_per_particle() {
        let cfg = config(&[("enn", "mlp,ensemble"), ("ensemble_size", "30")]);
        let costs = report_compute(&cfg, false).unwrap();
        assert_eq!(costs[1].stored_params, 30 * costs[0].stored_params);
        assert_eq!(costs[1].forward_flops, costs[0].forward_flops);
    }

    #[test]
    fn epinet_forward_costs_under_three_base_networks() {
        let cfg = config(&[("enn", "mlp,epinet")]);
        let costs = report_compute(&cfg, false).unwrap();
        assert!(costs[1].forward_flops < 3 * costs[0].forward_flops, "{costs:?}");
    }

    #[test]
    fn one_row_per_agent_with_timing() {
        let cfg = config(&[("updates", "3"), ("batch_size", "8")]);
        let costs = report_compute(&cfg, true).unwrap();
        let rows = cost_rows(&cfg, &costs);
        assert_eq!(rows.len(), cfg.agents.len());
        assert!(costs.iter().all(|c| c.ms_per_1000_updates.is_some_and(|m| m > 0.0)));
    }
}
