//! Joint predictive distributions over label tuples, averaged over the
//! epistemic index.

use super::config::{EpistemicIndex, ReferenceDistribution};
use super::params::EnnParams;
use crate::numerics::loss::{log_softmax_unchecked, softmax_unchecked};
use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

/// Largest label-tuple table `joint_prediction` will build.
pub const MAX_OUTCOMES: u128 = 1 << 20;

/// Probability of every label tuple `(y_1, .., y_τ)`. Tuples are laid out
/// in mixed radix with `y_1` most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    pub classes: usize,
    pub tau: usize,
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn offset(&self, labels: &[usize]) -> usize {
        assert_eq!(labels.len(), self.tau, "tuple length");
        labels.iter().fold(0, |acc, &y| {
            assert!(y < self.classes, "label {y} out of range");
            acc * self.classes + y
        })
    }

    pub fn get(&self, labels: &[usize]) -> f64 {
        self.probs[self.offset(labels)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Indices that integrate over the reference distribution: every particle
/// when the reference is a finite uniform set, else `m` samples.
pub fn evaluation_indices(reference: &ReferenceDistribution, m: usize, rng: &mut Rng) -> Vec<EpistemicIndex> {
    reference.enumerate().unwrap_or_else(|| reference.sample_many(m, rng))
}

/// `P̂(y_1..y_τ) = E_z Π_t softmax(f(x_t, z))_{y_t}`, one row of `x` per `t`.
pub fn joint_prediction(enn: &EnnParams, x: &Matrix, m: usize, rng: &mut Rng) -> Result<JointTable> {
    if m == 0 {
        return Err(Error::InvalidConfig("at least one index sample is needed".into()));
    }
    let zs = evaluation_indices(&enn.reference(), m, rng);
    joint_prediction_with(enn, x, &zs)
}

/// Same as [`joint_prediction`] with an explicit index set.
pub fn joint_prediction_with(enn: &EnnParams, x: &Matrix, zs: &[EpistemicIndex]) -> Result<JointTable> {
    let classes = enn.config().outputs;
    let tau = x.rows();
    let outcomes = (classes as u128).checked_pow(tau as u32).unwrap_or(u128::MAX);
    if outcomes > MAX_OUTCOMES {
        return Err(Error::EnumerationTooLarge {
            outcomes,
            limit: MAX_OUTCOMES,
        });
    }
    if zs.is_empty() {
        return Err(Error::InvalidConfig("empty index set".into()));
    }
    let outs = enn.forward_multi(x, zs)?;
    let size = outcomes as usize;
    let mut probs = vec![0.0; size];
    let mut table = vec![0.0; size];
    let mut p = vec![0.0; classes];
    let weight = 1.0 / zs.len() as f64;
    for logits in &outs {
        if logits.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ENN output".into()));
        }
        // Expand the product one input at a time: after step t the first
        // C^t entries hold Π_{s≤t} p_s(y_s).
        table[0] = weight;
        let mut len = 1;
        for t in 0..tau {
            softmax_unchecked(logits.row(t), &mut p);
            for i in (0..len).rev() {
                let v = table[i];
                for (c, pc) in p.iter().enumerate() {
                    table[i * classes + c] = v * pc;
                }
            }
            len *= classes;
        }
        for (acc, v) in probs.iter_mut().zip(&table) {
            *acc += v;
        }
    }
    Ok(JointTable { classes, tau, probs })
}

/// `log P̂(y_1..y_τ)` for one realised tuple, computed in log space.
pub fn log_joint_likelihood(enn: &EnnParams, x: &Matrix, labels: &[usize], zs: &[EpistemicIndex]) -> Result<f64> {
    if labels.len() != x.rows() {
        return Err(Error::Shape(format!("{} labels for {} inputs", labels.len(), x.rows())));
    }
    if zs.is_empty() {
        return Err(Error::InvalidConfig("empty index set".into()));
    }
    let classes = enn.config().outputs;
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let outs = enn.forward_multi(x, zs)?;
    let mut lp = vec![0.0; classes];
    let per_index: Vec<f64> = outs
        .iter()
        .map(|logits| {
            labels
                .iter()
                .enumerate()
                .map(|(t, &y)| {
                    log_softmax_unchecked(logits.row(t), &mut lp);
                    lp[y]
                })
                .sum()
        })
        .collect();
    let max = per_index.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("log likelihood".into()));
    }
    let s: f64 = per_index.iter().map(|v| (v - max).exp()).sum();
    Ok(max + (s / zs.len() as f64).ln())
}
