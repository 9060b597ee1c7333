use crate::numerics::{MlpShape, Rng};
use crate::{Error, Result};

/// The six benchmark ENN families and their extra hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    /// Plain MLP; ignores the index.
    Mlp,
    /// Deep ensemble of `size` independently initialised networks.
    Ensemble { size: usize },
    /// MC dropout with one Bernoulli mask per hidden unit per index.
    Dropout { rate: f64 },
    /// Linear hypermodel `w(z) = b + A z` with a frozen additive prior of
    /// the same form.
    Hypermodel { index_dim: usize, prior_scale: f64 },
    /// Ensemble where each particle carries a frozen additive prior network.
    EnsemblePlus { size: usize, prior_scale: f64 },
    /// Base network plus a small additive network on its last-layer features.
    /// With `include_input` the additive network also reads the raw input.
    Epinet {
        index_dim: usize,
        hidden: Vec<usize>,
        prior_hidden: Vec<usize>,
        prior_scale: f64,
        include_input: bool,
    },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Mlp => "mlp",
            Variant::Ensemble { .. } => "ensemble",
            Variant::Dropout { .. } => "dropout",
            Variant::Hypermodel { .. } => "hypermodel",
            Variant::EnsemblePlus { .. } => "ensemble_plus",
            Variant::Epinet { .. } => "epinet",
        }
    }

    pub fn prior_scale(&self) -> Option<f64> {
        match self {
            Variant::Hypermodel { prior_scale, .. }
            | Variant::EnsemblePlus { prior_scale, .. }
            | Variant::Epinet { prior_scale, .. } => Some(*prior_scale),
            _ => None,
        }
    }

    pub fn has_prior(&self) -> bool {
        self.prior_scale().is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnnConfig {
    pub input_dim: usize,
    /// Hidden widths of the base network.
    pub hidden: Vec<usize>,
    /// Number of outputs: classes for classification, actions for Q-values.
    pub outputs: usize,
    pub variant: Variant,
}

impl EnnConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, outputs: usize, variant: Variant) -> Self {
        Self {
            input_dim,
            hidden,
            outputs,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_dim == 0 || self.outputs == 0 || self.hidden.contains(&0) {
            return bad(format!(
                "sizes must be positive (input {}, hidden {:?}, outputs {})",
                self.input_dim, self.hidden, self.outputs
            ));
        }
        match &self.variant {
            Variant::Mlp => {}
            Variant::Ensemble { size } | Variant::EnsemblePlus { size, .. } if *size == 0 => {
                return bad("ensemble size must be at least 1".into())
            }
            Variant::Ensemble { .. } | Variant::EnsemblePlus { .. } => {}
            Variant::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return bad(format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            Variant::Hypermodel { index_dim, .. } if *index_dim == 0 => {
                return bad("index dimension must be at least 1".into())
            }
            Variant::Hypermodel { .. } => {}
            Variant::Epinet {
                index_dim,
                hidden,
                prior_hidden,
                ..
            } => {
                if *index_dim == 0 {
                    return bad("index dimension must be at least 1".into());
                }
                if hidden.is_empty() || hidden.contains(&0) || prior_hidden.contains(&0) {
                    return bad(format!(
                        "epinet needs positive hidden widths (got {hidden:?}, prior {prior_hidden:?})"
                    ));
                }
                if self.hidden.is_empty() {
                    return bad("epinet needs a base network with a hidden layer".into());
                }
            }
        }
        if let Some(s) = self.variant.prior_scale() {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("prior scale {s} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn base_shape(&self) -> Result<MlpShape> {
        MlpShape::with_hidden(self.input_dim, &self.hidden, self.outputs)
    }

    pub fn reference(&self) -> ReferenceDistribution {
        match &self.variant {
            Variant::Mlp => ReferenceDistribution::Particle { count: 1 },
            Variant::Ensemble { size } | Variant::EnsemblePlus { size, .. } => {
                ReferenceDistribution::Particle { count: *size }
            }
            Variant::Dropout { .. } => ReferenceDistribution::MaskSeed,
            Variant::Hypermodel { index_dim, .. } | Variant::Epinet { index_dim, .. } => {
                ReferenceDistribution::Gaussian { dim: *index_dim }
            }
        }
    }
}

/// The distribution `P_Z` epistemic indices are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceDistribution {
    /// Uniform over particles `0..count`.
    Particle { count: usize },
    /// Standard normal in `dim` dimensions.
    Gaussian { dim: usize },
    /// A fresh 64-bit seed for dropout masks.
    MaskSeed,
}

impl ReferenceDistribution {
    pub fn sample(&self, rng: &mut Rng) -> EpistemicIndex {
        match self {
            ReferenceDistribution::Particle { count } => EpistemicIndex::Particle(rng.below(*count)),
            ReferenceDistribution::Gaussian { dim } => {
                EpistemicIndex::Gaussian((0..*dim).map(|_| rng.normal()).collect())
            }
            ReferenceDistribution::MaskSeed => EpistemicIndex::MaskSeed(rng.next_u64()),
        }
    }

    pub fn sample_many(&self, count: usize, rng: &mut Rng) -> Vec<EpistemicIndex> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Every index when the support is a finite particle set.
    pub fn enumerate(&self) -> Option<Vec<EpistemicIndex>> {
        match self {
            ReferenceDistribution::Particle { count } => {
                Some((0..*count).map(EpistemicIndex::Particle).collect())
            }
            _ => None,
        }
    }
}

/// One draw `z` from the reference distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum EpistemicIndex {
    Particle(usize),
    Gaussian(Vec<f64>),
    MaskSeed(u64),
}

impl EpistemicIndex {
    pub fn kind(&self) -> &'static str {
        match self {
            EpistemicIndex::Particle(_) => "particle",
            EpistemicIndex::Gaussian(_) => "gaussian",
            EpistemicIndex::MaskSeed(_) => "mask-seed",
        }
    }
}
