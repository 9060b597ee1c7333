//! Epinet: `f(x, z) = μ(x) + σ_L(sg[φ(x)], z) + β σ_P(x, z)`.
//!
//! `σ_L(φ, z) = g([φ, z])ᵀ z` where `g` outputs an `index_dim x outputs`
//! matrix, and `σ_P(x, z) = Σ_i z_i p_i(x)` over `index_dim` frozen prior
//! networks that read the raw input. Configured with `include_input`, the
//! feature vector `φ` is preceded by the raw input `x`. The first layer of `g` is split into
//! its feature rows and index rows so the feature product is computed once
//! per batch rather than once per index.

use std::borrow::Cow;

use super::config::{EpistemicIndex, Variant};
use super::objective::Objective;
use super::params::EnnParams;
use super::rows::UniqueRows;
use crate::numerics::{backward_batch, forward_batch, gemm_acc, gemm_at_b_acc, Matrix, MlpShape, MlpTrace};

struct Parts<'a> {
    g: &'a [f64],
    feat: usize,
    d: usize,
    c: usize,
    h1: usize,
    tail: MlpShape,
}

impl<'a> Parts<'a> {
    fn new(enn: &'a EnnParams) -> Self {
        let g_shape = enn.layout.epinet.as_ref().expect("epinet layout");
        let p = enn.layout.base.param_count();
        let sizes = g_shape.sizes();
        let c = enn.config().outputs;
        let d = sizes.last().unwrap() / c;
        Parts {
            g: &enn.learnable()[p..],
            feat: sizes[0] - d,
            d,
            c,
            h1: sizes[1],
            tail: g_shape.tail().expect("epinet has a hidden layer"),
        }
    }

    fn w1_phi(&self) -> std::ops::Range<usize> {
        0..self.feat * self.h1
    }

    fn w1_z(&self) -> std::ops::Range<usize> {
        self.feat * self.h1..(self.feat + self.d) * self.h1
    }

    fn b1(&self) -> std::ops::Range<usize> {
        let s = (self.feat + self.d) * self.h1;
        s..s + self.h1
    }

    fn tail_params(&self) -> std::ops::Range<usize> {
        (self.feat + self.d + 1) * self.h1..self.g.len()
    }

    /// `φ · W1_φ + b1`, shared by every index.
    fn feature_preactivation(&self, phi: &Matrix) -> Matrix {
        let n = phi.rows();
        let mut pre = Matrix::zeros(n, self.h1);
        let b1 = &self.g[self.b1()];
        for r in 0..n {
            pre.row_mut(r).copy_from_slice(b1);
        }
        gemm_acc(n, self.feat, self.h1, phi.as_slice(), &self.g[self.w1_phi()], 1.0, pre.as_mut_slice());
        pre
    }

    /// First hidden activation and tail trace for one index.
    fn head(&self, pre_phi: &Matrix, z: &[f64]) -> (Matrix, MlpTrace) {
        let w1z = &self.g[self.w1_z()];
        let mut shift = vec![0.0; self.h1];
        for (d, zd) in z.iter().enumerate() {
            for (s, w) in shift.iter_mut().zip(&w1z[d * self.h1..(d + 1) * self.h1]) {
                *s += zd * w;
            }
        }
        let mut a1 = pre_phi.clone();
        for r in 0..a1.rows() {
            for (v, s) in a1.row_mut(r).iter_mut().zip(&shift) {
                *v = (*v + s).max(0.0);
            }
        }
        let trace = forward_batch(&self.tail, &self.g[self.tail_params()], &a1, None);
        (a1, trace)
    }

    /// `out = μ + gᵀz + β Σ_i z_i p̃_i`.
    fn combine(&self, mu: &Matrix, gout: &Matrix, z: &[f64], priors: &[Matrix], beta: f64) -> Matrix {
        let mut out = mu.clone();
        for r in 0..out.rows() {
            let g = gout.row(r);
            let o = out.row_mut(r);
            for (c, ov) in o.iter_mut().enumerate() {
                let mut learn = 0.0;
                let mut prior = 0.0;
                for (i, zi) in z.iter().enumerate() {
                    learn += g[i * self.c + c] * zi;
                    prior += zi * priors[i].get(r, c);
                }
                *ov += learn + beta * prior;
            }
        }
        out
    }
}

fn gaussian(z: &EpistemicIndex) -> &[f64] {
    match z {
        EpistemicIndex::Gaussian(v) => v,
        _ => unreachable!("checked"),
    }
}

/// Prior particle outputs with `(p - shift) * scale` applied.
fn particle_outputs(enn: &EnnParams, x: &Matrix, shift: f64, scale: f64) -> Vec<Matrix> {
    let shape = enn.layout.prior.as_ref().expect("epinet prior layout");
    let r = shape.param_count();
    enn.frozen()
        .chunks_exact(r)
        .map(|p| {
            let mut out = forward_batch(shape, p, x, None).output;
            out.as_mut_slice().iter_mut().for_each(|v| *v = (*v - shift) * scale);
            out
        })
        .collect()
}

/// The epinet's feature input: `φ`, or `[x, φ]` when it also reads the raw input.
fn epinet_input<'m>(enn: &EnnParams, x: &Matrix, phi: &'m Matrix) -> Cow<'m, Matrix> {
    if !matches!(enn.config().variant, Variant::Epinet { include_input: true, .. }) {
        return Cow::Borrowed(phi);
    }
    let mut m = Matrix::zeros(x.rows(), x.cols() + phi.cols());
    for r in 0..x.rows() {
        m.row_mut(r)[..x.cols()].copy_from_slice(x.row(r));
        m.row_mut(r)[x.cols()..].copy_from_slice(phi.row(r));
    }
    Cow::Owned(m)
}

fn base_trace(enn: &EnnParams, x: &Matrix) -> MlpTrace {
    let p = enn.layout.base.param_count();
    forward_batch(&enn.layout.base, &enn.learnable()[..p], x, None)
}

pub(crate) fn forward_multi(
    enn: &EnnParams,
    x: &Matrix,
    zs: &[EpistemicIndex],
    features: Option<&Matrix>,
) -> Vec<Matrix> {
    let parts = Parts::new(enn);
    let trace = base_trace(enn, x);
    let phi = epinet_input(enn, x, features.unwrap_or_else(|| trace.features().expect("base has hidden layer")));
    let pre_phi = parts.feature_preactivation(&phi);
    let cal = enn.calibration();
    let priors = particle_outputs(enn, x, cal.shift, cal.scale);
    zs.iter()
        .map(|z| {
            let z = gaussian(z);
            let (_, tail) = parts.head(&pre_phi, z);
            parts.combine(&trace.output, &tail.output, z, &priors, enn.prior_scale())
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
    let parts = Parts::new(enn);
    let p = enn.layout.base.param_count();
    let rows = UniqueRows::new(x);
    let x = rows.x();
    let trace = base_trace(enn, x);
    let phi = epinet_input(enn, x, trace.features().expect("base has hidden layer"));
    let pre_phi = parts.feature_preactivation(&phi);
    let cal = enn.calibration();
    let priors = particle_outputs(enn, x, cal.shift, cal.scale);
    let n = x.rows();
    let (grad_base, grad_g) = grad.split_at_mut(p);

    let mut loss = 0.0;
    let mut base_up = Matrix::zeros(n, parts.c);
    let mut dpre_sum = Matrix::zeros(n, parts.h1);
    let mut gup = Matrix::zeros(n, parts.d * parts.c);
    let (tail_range, b1_range, w1z_range) = (parts.tail_params(), parts.b1(), parts.w1_z());
    for (pos, z) in zs.iter().enumerate() {
        let z = gaussian(z);
        let (a1, tail) = parts.head(&pre_phi, z);
        let out = parts.combine(&trace.output, &tail.output, z, &priors, enn.prior_scale());
        let out = rows.expand(&out);
        let mut up = Matrix::zeros(out.rows(), parts.c);
        loss += objective.accumulate(pos, &out, scale, &mut up);
        let up = rows.compress(&up);
        base_up.add_scaled(&up, 1.0);
        for r in 0..n {
            let u = up.row(r);
            let g = gup.row_mut(r);
            for (i, zi) in z.iter().enumerate() {
                for (c, uc) in u.iter().enumerate() {
                    g[i * parts.c + c] = uc * zi;
                }
            }
        }
        let da1 = backward_batch(
            &parts.tail,
            &parts.g[tail_range.clone()],
            &a1,
            &tail,
            &gup,
            None,
            &mut grad_g[tail_range.clone()],
            true,
        )
        .expect("input gradient requested");
        let mut colsum = vec![0.0; parts.h1];
        for r in 0..n {
            let (d, a) = (da1.row(r), a1.row(r));
            let acc = dpre_sum.row_mut(r);
            for j in 0..parts.h1 {
                if a[j] > 0.0 {
                    acc[j] += d[j];
                    colsum[j] += d[j];
                }
            }
        }
        for (gb, cs) in grad_g[b1_range.clone()].iter_mut().zip(&colsum) {
            *gb += cs;
        }
        let gz = &mut grad_g[w1z_range.clone()];
        for (dd, zd) in z.iter().enumerate() {
            for (gw, cs) in gz[dd * parts.h1..(dd + 1) * parts.h1].iter_mut().zip(&colsum) {
                *gw += zd * cs;
            }
        }
    }
    gemm_at_b_acc(
        n,
        parts.feat,
        parts.h1,
        phi.as_slice(),
        dpre_sum.as_slice(),
        1.0,
        &mut grad_g[parts.w1_phi()],
    );
    backward_batch(&enn.layout.base, &enn.learnable()[..p], x, &trace, &base_up, None, grad_base, false);
    loss
}

/// `Σ_i z_i (p_i(x) - shift)` without the calibration scale or `β`.
pub(crate) fn raw_prior(enn: &EnnParams, x: &Matrix, zs: &[EpistemicIndex], shift: f64) -> Vec<Matrix> {
    let priors = particle_outputs(enn, x, shift, 1.0);
    zs.iter()
        .map(|z| {
            let z = gaussian(z);
            let mut out = Matrix::zeros(x.rows(), enn.config().outputs);
            for (zi, p) in z.iter().zip(&priors) {
                out.add_scaled(p, *zi);
            }
            out
        })
        .collect()
}

/// Mean of the raw prior particle outputs over the inputs.
pub(crate) fn particle_mean(enn: &EnnParams, x: &Matrix) -> f64 {
    let priors = particle_outputs(enn, x, 0.0, 1.0);
    let count: usize = priors.iter().map(|p| p.as_slice().len()).sum();
    priors.iter().flat_map(|p| p.as_slice()).sum::<f64>() / count.max(1) as f64
}
