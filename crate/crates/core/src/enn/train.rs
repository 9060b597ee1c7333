use super::config::EpistemicIndex;
use super::objective::Objective;
use super::params::EnnParams;
use crate::numerics::{Adam, AdamConfig, Matrix};
use crate::{Error, Result};

/// Adam on `mean ℓ + (λ / N) ‖θ‖²`, where `N` is the amount of data seen so
/// far. The regulariser therefore fades as data accumulates.
#[derive(Clone, Debug)]
pub struct Trainer {
    adam: Adam,
    lambda: f64,
    last_l2: f64,
}

impl Trainer {
    pub fn new(enn: &EnnParams, adam: AdamConfig, lambda: f64) -> Self {
        Self {
            adam: Adam::new(adam, enn.learnable_count()),
            lambda,
            last_l2: 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps()
    }

    /// Regularisation weight for `data_size` observations.
    pub fn effective_l2(&self, data_size: usize) -> f64 {
        self.lambda / data_size.max(1) as f64
    }

    /// Weight used by the most recent step.
    pub fn last_l2(&self) -> f64 {
        self.last_l2
    }

    /// One gradient step; returns the regularised loss before the update.
    pub fn step(
        &mut self,
        enn: &mut EnnParams,
        x: &Matrix,
        zs: &[EpistemicIndex],
        objective: &Objective,
        data_size: usize,
    ) -> Result<f64> {
        let step = self.adam.steps() + 1;
        let mut lg = match enn.loss_grad(x, zs, objective) {
            Err(Error::NonFinite(_)) => return Err(Error::Divergence { step, loss: f64::NAN }),
            r => r?,
        };
        let l2 = self.effective_l2(data_size);
        self.last_l2 = l2;
        let loss = lg.loss + l2 * enn.l2_norm_sq();
        for (g, w) in lg.grad.iter_mut().zip(enn.learnable()) {
            *g += 2.0 * l2 * w;
        }
        self.adam.step(enn.learnable_mut(), &lg.grad)?;
        if !loss.is_finite() || enn.learnable().iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence { step, loss });
        }
        Ok(loss)
    }
}
