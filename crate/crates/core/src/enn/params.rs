use super::config::{EnnConfig, EpistemicIndex, ReferenceDistribution, Variant};
use super::objective::{LossGrad, Objective};
use super::rows::UniqueRows;
use super::{epinet, hypermodel, particles};
use crate::numerics::{Matrix, MlpParams, MlpShape, Rng};
use crate::{Error, Result};

/// Affine correction applied to prior-network outputs: `(p - shift) * scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorCalibration {
    pub shift: f64,
    pub scale: f64,
}

impl Default for PriorCalibration {
    fn default() -> Self {
        Self {
            shift: 0.0,
            scale: 1.0,
        }
    }
}

impl PriorCalibration {
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.shift) * self.scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub base: MlpShape,
    /// Learnable epinet network `g`: `[features + index_dim, hidden.., index_dim * outputs]`.
    pub epinet: Option<MlpShape>,
    /// Shape of one frozen prior particle of the epinet.
    pub prior: Option<MlpShape>,
}

/// Parameters of one ENN: a learnable block updated by training and a
/// frozen block (prior networks) that nothing ever writes to after `init`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnnParams {
    config: EnnConfig,
    pub(crate) layout: Layout,
    learnable: Vec<f64>,
    frozen: Vec<f64>,
    calibration: PriorCalibration,
}

pub(crate) fn layout_for(config: &EnnConfig) -> Result<Layout> {
    config.validate()?;
    let base = config.base_shape()?;
    let (epinet, prior) = match &config.variant {
        Variant::Epinet {
            index_dim,
            hidden,
            prior_hidden,
            include_input,
            ..
        } => {
            let mut feat = base.feature_dim().expect("validated: base has a hidden layer");
            if *include_input {
                feat += config.input_dim;
            }
            let g = MlpShape::with_hidden(feat + index_dim, hidden, index_dim * config.outputs)?;
            let p = MlpShape::with_hidden(config.input_dim, prior_hidden, config.outputs)?;
            (Some(g), Some(p))
        }
        _ => (None, None),
    };
    Ok(Layout {
        base,
        epinet,
        prior,
    })
}

/// `(learnable, frozen)` parameter counts for a configuration.
pub(crate) fn block_sizes(config: &EnnConfig, layout: &Layout) -> (usize, usize) {
    let p = layout.base.param_count();
    match &config.variant {
        Variant::Mlp | Variant::Dropout { .. } => (p, 0),
        Variant::Ensemble { size } => (size * p, 0),
        Variant::EnsemblePlus { size, .. } => (size * p, size * p),
        Variant::Hypermodel { index_dim, .. } => (p * (1 + index_dim), p * (1 + index_dim)),
        Variant::Epinet { index_dim, .. } => (
            p + layout.epinet.as_ref().unwrap().param_count(),
            index_dim * layout.prior.as_ref().unwrap().param_count(),
        ),
    }
}

impl EnnParams {
    /// Fresh parameters for `config`. Priors are drawn here and then frozen;
    /// the output layer of a learnable epinet starts at zero.
    pub fn init(config: &EnnConfig, rng: &mut Rng) -> Result<Self> {
        let layout = layout_for(config)?;
        let base = &layout.base;
        let p = base.param_count();
        let (learnable, frozen) = match &config.variant {
            Variant::Mlp | Variant::Dropout { .. } => (base.glorot_init(&mut rng.child("base")), vec![]),
            Variant::Ensemble { size } => {
                let mut l = Vec::with_capacity(size * p);
                for k in 0..*size {
                    l.extend(base.glorot_init(&mut rng.child("particle").child_idx(k as u64)));
                }
                (l, vec![])
            }
            Variant::EnsemblePlus { size, .. } => {
                let (mut l, mut f) = (Vec::with_capacity(size * p), Vec::with_capacity(size * p));
                for k in 0..*size {
                    l.extend(base.glorot_init(&mut rng.child("particle").child_idx(k as u64)));
                    f.extend(base.glorot_init(&mut rng.child("prior").child_idx(k as u64)));
                }
                (l, f)
            }
            Variant::Hypermodel { index_dim, .. } => (
                hypermodel::init_block(base, *index_dim, &mut rng.child("hyper")),
                hypermodel::init_block(base, *index_dim, &mut rng.child("hyper-prior")),
            ),
            Variant::Epinet { index_dim, .. } => {
                let g = layout.epinet.as_ref().unwrap();
                let mut l = base.glorot_init(&mut rng.child("base"));
                let mut gp = g.glorot_init(&mut rng.child("epinet"));
                let out = g.layers().last().unwrap();
                gp[out.w..].iter_mut().for_each(|v| *v = 0.0);
                l.extend(gp);
                let prior = layout.prior.as_ref().unwrap();
                let mut f = Vec::with_capacity(index_dim * prior.param_count());
                for i in 0..*index_dim {
                    f.extend(prior.he_normal_init(&mut rng.child("epinet-prior").child_idx(i as u64)));
                }
                (l, f)
            }
        };
        Ok(Self {
            config: config.clone(),
            layout,
            learnable,
            frozen,
            calibration: PriorCalibration::default(),
        })
    }

    /// Builds parameters from explicit blocks (hand-set weights, oracles).
    pub fn from_parts(config: &EnnConfig, learnable: Vec<f64>, frozen: Vec<f64>) -> Result<Self> {
        let layout = layout_for(config)?;
        let (nl, nf) = block_sizes(config, &layout);
        if learnable.len() != nl || frozen.len() != nf {
            return Err(Error::Shape(format!(
                "blocks of {}/{} parameters given, {nl}/{nf} expected",
                learnable.len(),
                frozen.len()
            )));
        }
        Ok(Self {
            config: config.clone(),
            layout,
            learnable,
            frozen,
            calibration: PriorCalibration::default(),
        })
    }

    /// Wraps a plain network as the index-invariant `mlp` ENN.
    pub fn from_mlp(mlp: &MlpParams) -> Result<Self> {
        let sizes = mlp.shape().sizes();
        let config = EnnConfig::new(
            sizes[0],
            sizes[1..sizes.len() - 1].to_vec(),
            *sizes.last().unwrap(),
            Variant::Mlp,
        );
        Self::from_parts(&config, mlp.as_slice().to_vec(), vec![])
    }

    pub fn config(&self) -> &EnnConfig {
        &self.config
    }

    pub fn reference(&self) -> ReferenceDistribution {
        self.config.reference()
    }

    pub fn learnable(&self) -> &[f64] {
        &self.learnable
    }

    pub fn learnable_mut(&mut self) -> &mut [f64] {
        &mut self.learnable
    }

    pub fn frozen(&self) -> &[f64] {
        &self.frozen
    }

    pub fn calibration(&self) -> PriorCalibration {
        self.calibration
    }

    pub fn set_calibration(&mut self, calibration: PriorCalibration) {
        self.calibration = calibration;
    }

    pub fn learnable_count(&self) -> usize {
        self.learnable.len()
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.len()
    }

    /// `‖θ‖²` over the learnable block.
    pub fn l2_norm_sq(&self) -> f64 {
        self.learnable.iter().map(|v| v * v).sum()
    }

    /// Overwrites the learnable block with `other`'s (target-network sync).
    pub fn copy_learnable_from(&mut self, other: &EnnParams) {
        assert_eq!(self.layout, other.layout, "layouts differ");
        self.learnable.copy_from_slice(&other.learnable);
    }

    pub(crate) fn check_index(&self, z: &EpistemicIndex) -> Result<()> {
        let mismatch = |expected| {
            Err(Error::IndexKind {
                expected,
                got: z.kind(),
            })
        };
        match (&self.config.variant, z) {
            (Variant::Mlp, _) => Ok(()),
            (Variant::Ensemble { size } | Variant::EnsemblePlus { size, .. }, EpistemicIndex::Particle(k)) => {
                if k < size {
                    Ok(())
                } else {
                    Err(Error::Shape(format!("particle {k} out of range for {size} particles")))
                }
            }
            (Variant::Ensemble { .. } | Variant::EnsemblePlus { .. }, _) => mismatch("particle"),
            (Variant::Dropout { .. }, EpistemicIndex::MaskSeed(_)) => Ok(()),
            (Variant::Dropout { .. }, _) => mismatch("mask-seed"),
            (
                Variant::Hypermodel { index_dim, .. } | Variant::Epinet { index_dim, .. },
                EpistemicIndex::Gaussian(v),
            ) => {
                if v.len() == *index_dim {
                    Ok(())
                } else {
                    Err(Error::Shape(format!(
                        "index has dimension {}, expected {index_dim}",
                        v.len()
                    )))
                }
            }
            (Variant::Hypermodel { .. } | Variant::Epinet { .. }, _) => mismatch("gaussian"),
        }
    }

    fn check_batch(&self, x: &Matrix, zs: &[EpistemicIndex]) -> Result<()> {
        if x.cols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "inputs have width {}, ENN expects {}",
                x.cols(),
                self.config.input_dim
            )));
        }
        zs.iter().try_for_each(|z| self.check_index(z))
    }

    /// `f(x, z)` for a single input.
    pub fn forward(&self, x: &[f64], z: &EpistemicIndex) -> Result<Vec<f64>> {
        let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&xm, z)?.into_vec())
    }

    /// `f(x_n, z)` for every row of `x` under one index.
    pub fn forward_batch(&self, x: &Matrix, z: &EpistemicIndex) -> Result<Matrix> {
        Ok(self.forward_multi(x, std::slice::from_ref(z))?.pop().unwrap())
    }

    /// `f(x_n, z_k)` for every row of `x` and every index, one matrix per index.
    /// Work that does not depend on the index is done once.
    pub fn forward_multi(&self, x: &Matrix, zs: &[EpistemicIndex]) -> Result<Vec<Matrix>> {
        self.check_batch(x, zs)?;
        let rows = UniqueRows::new(x);
        let xu = rows.x();
        let outs = match &self.config.variant {
            Variant::Hypermodel { .. } => hypermodel::forward_multi(self, xu, zs),
            Variant::Epinet { .. } => epinet::forward_multi(self, xu, zs, None),
            _ => particles::forward_multi(self, xu, zs),
        };
        Ok(outs.into_iter().map(|o| rows.expand(&o).into_owned()).collect())
    }

    /// Epinet forward where the epinet branch sees `features` instead of the
    /// base network's own last-layer features. This is the function whose
    /// gradient `loss_grad` reports (stop-gradient on the features).
    pub fn forward_with_features(&self, x: &Matrix, z: &EpistemicIndex, features: &Matrix) -> Result<Matrix> {
        self.check_batch(x, std::slice::from_ref(z))?;
        match &self.config.variant {
            Variant::Epinet { .. } => {
                let feat = self.layout.base.feature_dim().unwrap();
                if features.rows() != x.rows() || features.cols() != feat {
                    return Err(Error::Shape("feature matrix shape".into()));
                }
                Ok(epinet::forward_multi(self, x, std::slice::from_ref(z), Some(features))
                    .pop()
                    .unwrap())
            }
            _ => self.forward_batch(x, z),
        }
    }

    /// Last hidden-layer features of the base network.
    pub fn base_features(&self, x: &Matrix) -> Result<Matrix> {
        self.check_batch(x, &[])?;
        let p = self.layout.base.param_count();
        let trace = crate::numerics::forward_batch(&self.layout.base, &self.learnable[..p], x, None);
        trace
            .features()
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("base network has no hidden layer".into()))
    }

    /// Mean of `ℓ` over all (input, index) pairs and its gradient on the
    /// learnable block. Frozen priors get no gradient, and for the epinet
    /// no gradient flows from the epinet branch into the base features.
    pub fn loss_grad(&self, x: &Matrix, zs: &[EpistemicIndex], objective: &Objective) -> Result<LossGrad> {
        self.check_batch(x, zs)?;
        if zs.is_empty() || x.rows() == 0 {
            return Err(Error::Shape("loss over an empty batch".into()));
        }
        objective.validate(x.rows(), self.config.outputs, zs.len())?;
        let scale = 1.0 / (x.rows() * zs.len()) as f64;
        let mut grad = vec![0.0; self.learnable.len()];
        let loss = match &self.config.variant {
            Variant::Hypermodel { .. } => hypermodel::loss_grad(self, x, zs, objective, scale, &mut grad),
            Variant::Epinet { .. } => epinet::loss_grad(self, x, zs, objective, scale, &mut grad),
            _ => particles::loss_grad(self, x, zs, objective, scale, &mut grad),
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        Ok(LossGrad { loss, grad })
    }

    /// Raw (uncalibrated, unscaled) prior contribution for each index, or
    /// `None` for variants without a prior.
    pub fn prior_outputs(&self, x: &Matrix, zs: &[EpistemicIndex]) -> Result<Option<Vec<Matrix>>> {
        self.check_batch(x, zs)?;
        Ok(match &self.config.variant {
            Variant::EnsemblePlus { .. } => Some(particles::raw_prior(self, x, zs)),
            Variant::Hypermodel { .. } => Some(hypermodel::raw_prior(self, x, zs)),
            Variant::Epinet { .. } => Some(epinet::raw_prior(self, x, zs, 0.0)),
            _ => None,
        })
    }

    /// Fits the affine prior correction so that prior outputs over `states`
    /// and `zs` have mean 0 and variance 1. Returns `false` (and leaves the
    /// identity correction) when the observed variance is degenerate or the
    /// variant has no prior.
    pub fn fit_prior_calibration(&mut self, states: &Matrix, zs: &[EpistemicIndex]) -> Result<bool> {
        self.calibration = PriorCalibration::default();
        let shift = match &self.config.variant {
            Variant::Epinet { .. } => {
                self.check_batch(states, zs)?;
                epinet::particle_mean(self, states)
            }
            _ => 0.0,
        };
        let Some(outs) = self.prior_outputs(states, zs)? else {
            return Ok(false);
        };
        let values: Vec<f64> = match &self.config.variant {
            Variant::Epinet { .. } => epinet::raw_prior(self, states, zs, shift)
                .into_iter()
                .flat_map(Matrix::into_vec)
                .collect(),
            _ => outs.into_iter().flat_map(Matrix::into_vec).collect(),
        };
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var.is_nan() || var <= 1e-12 || !var.is_finite() {
            return Ok(false);
        }
        self.calibration = PriorCalibration {
            shift: match &self.config.variant {
                Variant::Epinet { .. } => shift,
                _ => mean,
            },
            scale: 1.0 / var.sqrt(),
        };
        Ok(true)
    }

    pub(crate) fn prior_scale(&self) -> f64 {
        self.config.variant.prior_scale().unwrap_or(0.0)
    }
}
