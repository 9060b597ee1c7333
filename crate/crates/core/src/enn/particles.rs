//! Variants where every index selects one ordinary network: mlp, ensemble,
//! ensemble with priors, and dropout (the index picks the mask).

use std::collections::BTreeMap;

use super::config::{EpistemicIndex, Variant};
use super::objective::Objective;
use super::params::EnnParams;
use super::rows::UniqueRows;
use crate::numerics::{backward_batch, forward_batch, Matrix, Rng};

/// Networks shared by a set of index positions.
struct Group<'a> {
    params: &'a [f64],
    grad_offset: usize,
    prior: Option<&'a [f64]>,
    masks: Option<Vec<Vec<f64>>>,
    positions: Vec<usize>,
}

/// Inverted-dropout factors for each hidden unit, derived from the seed only.
pub(crate) fn dropout_masks(seed: u64, hidden: &[usize], rate: f64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed).child("dropout-mask");
    let keep = 1.0 / (1.0 - rate);
    hidden
        .iter()
        .map(|&w| (0..w).map(|_| if rng.uniform() < rate { 0.0 } else { keep }).collect())
        .collect()
}

fn groups<'a>(enn: &'a EnnParams, zs: &[EpistemicIndex]) -> Vec<Group<'a>> {
    let p = enn.layout.base.param_count();
    let learn = enn.learnable();
    match &enn.config().variant {
        Variant::Mlp => vec![Group {
            params: learn,
            grad_offset: 0,
            prior: None,
            masks: None,
            positions: (0..zs.len()).collect(),
        }],
        Variant::Ensemble { .. } | Variant::EnsemblePlus { .. } => {
            let with_prior = matches!(enn.config().variant, Variant::EnsemblePlus { .. });
            let mut by_particle: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (pos, z) in zs.iter().enumerate() {
                let EpistemicIndex::Particle(k) = z else { unreachable!("checked") };
                by_particle.entry(*k).or_default().push(pos);
            }
            by_particle
                .into_iter()
                .map(|(k, positions)| Group {
                    params: &learn[k * p..(k + 1) * p],
                    grad_offset: k * p,
                    prior: with_prior.then(|| &enn.frozen()[k * p..(k + 1) * p]),
                    masks: None,
                    positions,
                })
                .collect()
        }
        Variant::Dropout { rate } => {
            let mut by_seed: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (pos, z) in zs.iter().enumerate() {
                let EpistemicIndex::MaskSeed(s) = z else { unreachable!("checked") };
                by_seed.entry(*s).or_default().push(pos);
            }
            by_seed
                .into_iter()
                .map(|(seed, positions)| Group {
                    params: learn,
                    grad_offset: 0,
                    prior: None,
                    masks: Some(dropout_masks(seed, &enn.config().hidden, *rate)),
                    positions,
                })
                .collect()
        }
        _ => unreachable!("not a particle variant"),
    }
}

fn add_prior(enn: &EnnParams, prior: &[f64], x: &Matrix, out: &mut Matrix) {
    let raw = forward_batch(&enn.layout.base, prior, x, None).output;
    let (beta, cal) = (enn.prior_scale(), enn.calibration());
    for (o, r) in out.as_mut_slice().iter_mut().zip(raw.as_slice()) {
        *o += beta * cal.apply(*r);
    }
}

pub(crate) fn forward_multi(enn: &EnnParams, x: &Matrix, zs: &[EpistemicIndex]) -> Vec<Matrix> {
    let mut outs: Vec<Option<Matrix>> = vec![None; zs.len()];
    for g in groups(enn, zs) {
        let mut out = forward_batch(&enn.layout.base, g.params, x, g.masks.as_deref()).output;
        if let Some(prior) = g.prior {
            add_prior(enn, prior, x, &mut out);
        }
        for &pos in &g.positions {
            outs[pos] = Some(out.clone());
        }
    }
    outs.into_iter().map(|o| o.expect("every position grouped")).collect()
}

pub(crate) fn loss_grad(
    enn: &EnnParams,
    x: &Matrix,
    zs: &[EpistemicIndex],
    objective: &Objective,
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let shape = &enn.layout.base;
    let p = shape.param_count();
    let rows = UniqueRows::new(x);
    let xu = rows.x();
    let mut loss = 0.0;
    for g in groups(enn, zs) {
        let masks = g.masks.as_deref();
        let trace = forward_batch(shape, g.params, xu, masks);
        let mut out = trace.output.clone();
        if let Some(prior) = g.prior {
            add_prior(enn, prior, xu, &mut out);
        }
        let out = rows.expand(&out);
        let mut up = Matrix::zeros(out.rows(), out.cols());
        for &pos in &g.positions {
            loss += objective.accumulate(pos, &out, scale, &mut up);
        }
        let dst = &mut grad[g.grad_offset..g.grad_offset + p];
        backward_batch(shape, g.params, xu, &trace, &rows.compress(&up), masks, dst, false);
    }
    loss
}

pub(crate) fn raw_prior(enn: &EnnParams, x: &Matrix, zs: &[EpistemicIndex]) -> Vec<Matrix> {
    let p = enn.layout.base.param_count();
    zs.iter()
        .map(|z| {
            let EpistemicIndex::Particle(k) = z else { unreachable!("checked") };
            forward_batch(&enn.layout.base, &enn.frozen()[k * p..(k + 1) * p], x, None).output
        })
        .collect()
}
