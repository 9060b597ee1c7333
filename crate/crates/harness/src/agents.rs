//! Maps agent names and shared network settings onto ENN configurations.

use enn_core::enn::{EnnConfig, Variant};
use enn_core::numerics::AdamConfig;

use crate::config::NetSettings;

/// The ENN for `agent` mapping `input_dim` inputs to `outputs` values, or
/// `None` for names that are not ENN agents.
pub fn enn_config(agent: &str, net: &NetSettings, input_dim: usize, outputs: usize) -> Option<EnnConfig> {
    let variant = match agent {
        "mlp" => Variant::Mlp,
        "ensemble" => Variant::Ensemble {
            size: net.ensemble_size,
        },
        "dropout" => Variant::Dropout { rate: net.dropout_rate },
        "hypermodel" => Variant::Hypermodel {
            index_dim: net.index_dim,
            prior_scale: net.prior_scale,
        },
        "ensemble_plus" => Variant::EnsemblePlus {
            size: net.ensemble_size,
            prior_scale: net.prior_scale,
        },
        "epinet" => Variant::Epinet {
            index_dim: net.index_dim,
            hidden: net.epinet_hidden.clone(),
            prior_hidden: net.epinet_prior_hidden.clone(),
            prior_scale: net.epinet_prior_scale,
            include_input: net.epinet_input,
        },
        _ => return None,
    };
    Some(EnnConfig::new(input_dim, net.hidden.clone(), outputs, variant))
}

pub fn adam(net: &NetSettings) -> AdamConfig {
    AdamConfig::with_lr(net.learning_rate)
}
