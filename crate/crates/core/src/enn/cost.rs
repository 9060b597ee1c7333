//! Compute accounting: parameter counts and multiply-adds per forward pass
//! for one (input, index) pair.

use super::config::{EnnConfig, Variant};
use super::params::{block_sizes, layout_for};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub learnable: usize,
    pub frozen: usize,
}

impl ParamCount {
    pub fn stored(&self) -> usize {
        self.learnable + self.frozen
    }
}

pub fn param_count(config: &EnnConfig) -> Result<ParamCount> {
    let layout = layout_for(config)?;
    let (learnable, frozen) = block_sizes(config, &layout);
    Ok(ParamCount { learnable, frozen })
}

/// Multiply-adds to evaluate `f(x, z)` once. Ensembles evaluate only the
/// selected particle; hypermodels pay for generating the weights.
pub fn flops_per_forward(config: &EnnConfig) -> Result<usize> {
    let layout = layout_for(config)?;
    let base = layout.base.flops();
    let c = config.outputs;
    Ok(match &config.variant {
        Variant::Mlp | Variant::Ensemble { .. } | Variant::Dropout { .. } => base,
        Variant::EnsemblePlus { .. } => 2 * base,
        Variant::Hypermodel { index_dim, .. } => {
            let p = layout.base.param_count();
            2 * (p * index_dim + base)
        }
        Variant::Epinet { index_dim, .. } => {
            let g = layout.epinet.as_ref().unwrap().flops();
            let prior = layout.prior.as_ref().unwrap().flops();
            base + g + index_dim * c + index_dim * prior + index_dim * c
        }
    })
}
