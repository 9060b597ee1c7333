use super::linalg::{gemm_a_bt, gemm_acc, gemm_at_b_acc, Matrix};
use super::Rng;
use crate::{Error, Result};

/// Layer widths of a ReLU MLP, input first and output last.
///
/// Parameters are stored flat, layer by layer: a `fan_in x fan_out`
/// row-major weight block followed by a `fan_out` bias.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MlpShape {
    sizes: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerSpan {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: usize,
    pub b: usize,
}

impl LayerSpan {
    pub fn end(&self) -> usize {
        self.b + self.fan_out
    }
}

impl MlpShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "an MLP needs at least an input and an output width".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("zero layer width in {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    /// `input -> hidden... -> output`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Width of the last hidden layer, the feature width seen by an epinet.
    pub fn feature_dim(&self) -> Option<usize> {
        (self.sizes.len() > 2).then(|| self.sizes[self.sizes.len() - 2])
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Multiply-adds in one forward pass of a single input.
    pub fn flops(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub(crate) fn layers(&self) -> impl Iterator<Item = LayerSpan> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let span = LayerSpan {
                fan_in: w[0],
                fan_out: w[1],
                w: off,
                b: off + w[0] * w[1],
            };
            off = span.end();
            span
        })
    }

    /// The same network without its first layer.
    pub(crate) fn tail(&self) -> Option<MlpShape> {
        (self.sizes.len() > 2).then(|| MlpShape {
            sizes: self.sizes[1..].to_vec(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot_init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        for l in self.layers() {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            for w in &mut p[l.w..l.b] {
                *w = rng.uniform_range(-limit, limit);
            }
        }
        p
    }

    /// Normal weights with variance `2 / fan_in`, zero biases.
    pub fn he_normal_init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        for l in self.layers() {
            let std = (2.0 / l.fan_in as f64).sqrt();
            for w in &mut p[l.w..l.b] {
                *w = std * rng.normal();
            }
        }
        p
    }
}

/// An owned MLP: shape plus flat parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    shape: MlpShape,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn new(shape: MlpShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given for a shape needing {}",
                data.len(),
                shape.param_count()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn init(shape: MlpShape, rng: &mut Rng) -> Self {
        let data = shape.glorot_init(rng);
        Self { shape, data }
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(weights, bias)` of layer `i`; weights are `fan_in x fan_out` row-major.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let l = self.shape.layers().nth(i).expect("layer index out of range");
        (&self.data[l.w..l.b], &self.data[l.b..l.end()])
    }

    pub fn layer_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        let l = self.shape.layers().nth(i).expect("layer index out of range");
        let (w, b) = self.data[l.w..l.end()].split_at_mut(l.b - l.w);
        (w, b)
    }
}

/// Activations kept by [`forward_batch`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// Post-activation output of each hidden layer (after dropout masks).
    pub hidden: Vec<Matrix>,
    pub output: Matrix,
}

impl MlpTrace {
    /// Last hidden activations, if the network has a hidden layer.
    pub fn features(&self) -> Option<&Matrix> {
        self.hidden.last()
    }
}

// Mostly-zero inputs (one-hot states) go through a row-sparse product.
const SPARSE_THRESHOLD: f64 = 0.75;

fn affine(x: &Matrix, w: &[f64], b: &[f64], fan_out: usize) -> Matrix {
    let (n, fan_in) = (x.rows(), x.cols());
    let mut out = Matrix::zeros(n, fan_out);
    for r in 0..n {
        out.row_mut(r).copy_from_slice(b);
    }
    if x.zero_fraction() > SPARSE_THRESHOLD {
        for r in 0..n {
            let (xr, or) = (x.row(r), out.row_mut(r));
            for (j, &v) in xr.iter().enumerate() {
                if v != 0.0 {
                    for (o, wv) in or.iter_mut().zip(&w[j * fan_out..(j + 1) * fan_out]) {
                        *o += v * wv;
                    }
                }
            }
        }
    } else {
        gemm_acc(n, fan_in, fan_out, x.as_slice(), w, 1.0, out.as_mut_slice());
    }
    out
}

fn weight_grad(x: &Matrix, delta: &Matrix, dw: &mut [f64]) {
    let (n, fan_in, fan_out) = (x.rows(), x.cols(), delta.cols());
    if x.zero_fraction() > SPARSE_THRESHOLD {
        for r in 0..n {
            let d = delta.row(r);
            for (j, &v) in x.row(r).iter().enumerate() {
                if v != 0.0 {
                    for (g, dv) in dw[j * fan_out..(j + 1) * fan_out].iter_mut().zip(d) {
                        *g += v * dv;
                    }
                }
            }
        }
    } else {
        gemm_at_b_acc(n, fan_in, fan_out, x.as_slice(), delta.as_slice(), 1.0, dw);
    }
}

/// Batched forward pass. `masks`, when given, holds one multiplicative
/// factor per unit for every hidden layer (inverted dropout).
pub fn forward_batch(
    shape: &MlpShape,
    params: &[f64],
    x: &Matrix,
    masks: Option<&[Vec<f64>]>,
) -> MlpTrace {
    assert_eq!(params.len(), shape.param_count(), "parameter length");
    assert_eq!(x.cols(), shape.input_dim(), "input width");
    let last = shape.num_layers() - 1;
    let mut hidden = Vec::with_capacity(last);
    let mut output = None;
    for (i, l) in shape.layers().enumerate() {
        let input = if i == 0 { x } else { &hidden[i - 1] };
        let mut z = affine(input, &params[l.w..l.b], &params[l.b..l.end()], l.fan_out);
        if i == last {
            output = Some(z);
        } else {
            let mask = masks.map(|m| m[i].as_slice());
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = v.max(0.0) * mask.map_or(1.0, |m| m[j]);
                }
            }
            hidden.push(z);
        }
    }
    MlpTrace {
        hidden,
        output: output.expect("at least one layer"),
    }
}

/// Batched backward pass: accumulates `∂(Σ upstream ⊙ output)/∂params`
/// into `grad` and optionally returns the gradient with respect to `x`.
#[allow(clippy::too_many_arguments)]
pub fn backward_batch(
    shape: &MlpShape,
    params: &[f64],
    x: &Matrix,
    trace: &MlpTrace,
    upstream: &Matrix,
    masks: Option<&[Vec<f64>]>,
    grad: &mut [f64],
    want_input_grad: bool,
) -> Option<Matrix> {
    assert_eq!(grad.len(), shape.param_count(), "gradient length");
    assert_eq!(
        (upstream.rows(), upstream.cols()),
        (x.rows(), shape.output_dim()),
        "upstream shape"
    );
    let spans: Vec<LayerSpan> = shape.layers().collect();
    let mut delta = upstream.clone();
    for (i, l) in spans.iter().enumerate().rev() {
        let input = if i == 0 { x } else { &trace.hidden[i - 1] };
        weight_grad(input, &delta, &mut grad[l.w..l.b]);
        let db = &mut grad[l.b..l.end()];
        for r in 0..delta.rows() {
            for (g, d) in db.iter_mut().zip(delta.row(r)) {
                *g += d;
            }
        }
        if i == 0 && !want_input_grad {
            return None;
        }
        let mut d_in = Matrix::zeros(delta.rows(), l.fan_in);
        gemm_a_bt(
            delta.rows(),
            l.fan_in,
            l.fan_out,
            delta.as_slice(),
            &params[l.w..l.b],
            d_in.as_mut_slice(),
        );
        if i == 0 {
            return Some(d_in);
        }
        let act = &trace.hidden[i - 1];
        let mask = masks.map(|m| m[i - 1].as_slice());
        for r in 0..d_in.rows() {
            let a = act.row(r);
            for (j, d) in d_in.row_mut(r).iter_mut().enumerate() {
                *d = if a[j] > 0.0 { *d * mask.map_or(1.0, |m| m[j]) } else { 0.0 };
            }
        }
        delta = d_in;
    }
    unreachable!("loop returns at the first layer")
}

fn check_input(shape: &MlpShape, x: &[f64]) -> Result<()> {
    if x.len() != shape.input_dim() {
        return Err(Error::Shape(format!(
            "input has length {}, network expects {}",
            x.len(),
            shape.input_dim()
        )));
    }
    Ok(())
}

/// Output-layer pre-activations for a single input.
pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(&params.shape, x)?;
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(forward_batch(&params.shape, &params.data, &xm, None).output.into_vec())
}

/// Gradient of `upstream · output` with respect to the flat parameters.
pub fn mlp_grad(params: &MlpParams, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    check_input(&params.shape, x)?;
    if upstream.len() != params.shape.output_dim() {
        return Err(Error::Shape(format!(
            "upstream has length {}, network outputs {}",
            upstream.len(),
            params.shape.output_dim()
        )));
    }
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let trace = forward_batch(&params.shape, &params.data, &xm, None);
    let up = Matrix::from_vec(1, upstream.len(), upstream.to_vec())?;
    let mut grad = vec![0.0; params.data.len()];
    backward_batch(&params.shape, &params.data, &xm, &trace, &up, None, &mut grad, false);
    Ok(grad)
}
