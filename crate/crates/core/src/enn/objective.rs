use crate::numerics::Matrix;
use crate::{Error, Result};

/// Per-sample data loss `ℓ` used by [`super::EnnParams::loss_grad`].
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// Classification with one label per input.
    CrossEntropy { labels: &'a [usize] },
    /// Squared error on one output per input. `targets[k][n]` is the target
    /// for input `n` under the `k`-th index of the batch (TD targets depend
    /// on the index through the target network).
    Quadratic {
        actions: &'a [usize],
        targets: &'a [Vec<f64>],
    },
}

/// Mean data loss over (input, index) pairs and its gradient with respect to
/// the learnable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl Objective<'_> {
    pub(crate) fn validate(&self, n: usize, outputs: usize, num_indices: usize) -> Result<()> {
        match self {
            Objective::CrossEntropy { labels } => {
                if labels.len() != n {
                    return Err(Error::Shape(format!("{} labels for {n} inputs", labels.len())));
                }
                if let Some(&label) = labels.iter().find(|&&l| l >= outputs) {
                    return Err(Error::LabelOutOfRange {
                        label,
                        classes: outputs,
                    });
                }
            }
            Objective::Quadratic { actions, targets } => {
                if actions.len() != n {
                    return Err(Error::Shape(format!("{} actions for {n} inputs", actions.len())));
                }
                if let Some(&action) = actions.iter().find(|&&a| a >= outputs) {
                    return Err(Error::InvalidAction {
                        action,
                        count: outputs,
                    });
                }
                if targets.len() != num_indices || targets.iter().any(|t| t.len() != n) {
                    return Err(Error::Shape(format!(
                        "quadratic targets must be {num_indices} rows of {n}"
                    )));
                }
                if targets.iter().flatten().any(|t| !t.is_finite()) {
                    return Err(Error::NonFinite("quadratic targets".into()));
                }
            }
        }
        Ok(())
    }

    /// Adds `scale · ∂ℓ/∂out` into `up` for the index at `pos` and returns
    /// `scale · Σ_n ℓ_n`.
    pub(crate) fn accumulate(&self, pos: usize, out: &Matrix, scale: f64, up: &mut Matrix) -> f64 {
        let mut total = 0.0;
        match self {
            Objective::CrossEntropy { labels } => {
                let mut probs = vec![0.0; out.cols()];
                for (r, &y) in labels.iter().enumerate() {
                    let logits = out.row(r);
                    crate::numerics::loss::log_softmax_unchecked(logits, &mut probs);
                    total -= probs[y];
                    let g = up.row_mut(r);
                    for (j, lp) in probs.iter().enumerate() {
                        g[j] += scale * (lp.exp() - if j == y { 1.0 } else { 0.0 });
                    }
                }
            }
            Objective::Quadratic { actions, targets } => {
                for (r, &a) in actions.iter().enumerate() {
                    let diff = out.get(r, a) - targets[pos][r];
                    total += diff * diff;
                    up.row_mut(r)[a] += scale * 2.0 * diff;
                }
            }
        }
        scale * total
    }
}
