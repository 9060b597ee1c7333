//! Linear hypermodel: base-network weights `w(z) = b + A z`.
//!
//! A block stores `b` (one entry per base parameter) followed by `A`
//! row-major with one row of `index_dim` coefficients per base parameter.

use super::config::EpistemicIndex;
use super::objective::Objective;
use super::params::EnnParams;
use super::rows::UniqueRows;
use crate::numerics::{backward_batch, forward_batch, Matrix, MlpShape, Rng};

pub(crate) fn init_block(base: &MlpShape, index_dim: usize, rng: &mut Rng) -> Vec<f64> {
    let p = base.param_count();
    let mut block = base.glorot_init(&mut rng.child("b"));
    block.resize(p * (1 + index_dim), 0.0);
    let mut r = rng.child("a");
    let damp = 1.0 / (index_dim as f64).sqrt();
    for l in base.layers() {
        let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt() * damp;
        for w in l.w..l.b {
            for d in 0..index_dim {
                block[p + w * index_dim + d] = r.uniform_range(-limit, limit);
            }
        }
    }
    block
}

fn generate(block: &[f64], p: usize, z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let (b, a) = block.split_at(p);
    b.iter()
        .zip(a.chunks_exact(d))
        .map(|(bi, row)| bi + crate::numerics::dot(row, z))
        .collect()
}

fn gaussian(z: &EpistemicIndex) -> &[f64] {
    match z {
        EpistemicIndex::Gaussian(v) => v,
        _ => unreachable!("checked"),
    }
}

fn add_prior(enn: &EnnParams, z: &[f64], x: &Matrix, out: &mut Matrix) {
    let p = enn.layout.base.param_count();
    let wp = generate(enn.frozen(), p, z);
    let raw = forward_batch(&enn.layout.base, &wp, x, None).output;
    let (beta, cal) = (enn.prior_scale(), enn.calibration());
    for (o, r) in out.as_mut_slice().iter_mut().zip(raw.as_slice()) {
        *o += beta * cal.apply(*r);
    }
}

pub(crate) fn forward_multi(enn: &EnnParams, x: &Matrix, zs: &[EpistemicIndex]) -> Vec<Matrix> {
    let p = enn.layout.base.param_count();
    zs.iter()
        .map(|z| {
            let z = gaussian(z);
            let w = generate(enn.learnable(), p, z);
            let mut out = forward_batch(&enn.layout.base, &w, x, None).output;
            add_prior(enn, z, x, &mut out);
            out
        })
        .collect()
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
    let mut dw = vec![0.0; p];
    for (pos, z) in zs.iter().enumerate() {
        let z = gaussian(z);
        let w = generate(enn.learnable(), p, z);
        let trace = forward_batch(shape, &w, xu, None);
        let mut out = trace.output.clone();
        add_prior(enn, z, xu, &mut out);
        let out = rows.expand(&out);
        let mut up = Matrix::zeros(out.rows(), out.cols());
        loss += objective.accumulate(pos, &out, scale, &mut up);
        dw.iter_mut().for_each(|v| *v = 0.0);
        backward_batch(shape, &w, xu, &trace, &rows.compress(&up), None, &mut dw, false);
        let (gb, ga) = grad.split_at_mut(p);
        for (i, &g) in dw.iter().enumerate() {
            gb[i] += g;
            for (a, zd) in ga[i * z.len()..(i + 1) * z.len()].iter_mut().zip(z) {
                *a += g * zd;
            }
        }
    }
    loss
}

pub(crate) fn raw_prior(enn: &EnnParams, x: &Matrix, zs: &[EpistemicIndex]) -> Vec<Matrix> {
    let p = enn.layout.base.param_count();
    zs.iter()
        .map(|z| {
            let wp = generate(enn.frozen(), p, gaussian(z));
            forward_batch(&enn.layout.base, &wp, x, None).output
        })
        .collect()
}
