//! Batched forward evaluation and hand-written back-propagation.
//!
//! Rows of every matrix are samples. A single sample is a batch of one.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

use super::{ArchitectureSpec, LayerSkip, ParameterSet};

/// Intermediate values recorded by [`forward_batch`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    /// `x(0)`, the network input.
    pub input: Matrix,
    /// `z(l)` for every affine layer, output layer last.
    pub pre_activation: Vec<Matrix>,
    /// `σ(z(l))` for every hidden layer, before any skip addition.
    pub activation: Vec<Matrix>,
    /// `x(l)` for every hidden layer, after the skip addition.
    pub hidden: Vec<Matrix>,
    pub output: Matrix,
}

impl ForwardCache {
    /// Output of hidden layer `l` (1-based), or the input for `l = 0`.
    pub fn layer_output(&self, l: usize) -> &Matrix {
        if l == 0 {
            &self.input
        } else {
            &self.hidden[l - 1]
        }
    }
}

/// Gradients returned by [`backward_batch`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ParameterSet,
    /// `∂L/∂x(0)` per sample.
    pub input: Matrix,
    /// `∂L/∂z(l)` per affine layer, output layer last.
    pub pre_activation: Vec<Matrix>,
}

#[inline]
fn powi(v: f64, p: u32) -> f64 {
    v.powi(p as i32)
}

/// `x · Wᵀ + b` for every row of `x`.
pub(crate) fn affine(x: &Matrix, weight: &Matrix, bias: &[f64]) -> Matrix {
    let mut z = x.mul_transposed(weight);
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
    z
}

pub fn forward_batch(
    spec: &ArchitectureSpec,
    params: &ParameterSet,
    inputs: &Matrix,
) -> Result<(Matrix, ForwardCache)> {
    spec.validate()?;
    params.check_shapes(spec)?;
    if inputs.cols() != spec.input_dim {
        return Err(Error::contract(format!(
            "input has {} columns, architecture expects {}",
            inputs.cols(),
            spec.input_dim
        )));
    }
    let act = spec.activation;
    let n_hidden = spec.n_hidden();
    let mut pre_activation = Vec::with_capacity(n_hidden + 1);
    let mut activation = Vec::with_capacity(n_hidden);
    let mut hidden: Vec<Matrix> = Vec::with_capacity(n_hidden);

    for l in 1..=n_hidden {
        let prev = if l == 1 { inputs } else { &hidden[l - 2] };
        let layer = &params.layers[l - 1];
        let z = affine(prev, &layer.weight, &layer.bias);
        let a = z.map(|v| act.apply(v));
        let x = match spec.layer_skip(l) {
            LayerSkip::Power(p) => a.zip_map(prev, |f, s| f + powi(s, p)),
            LayerSkip::None | LayerSkip::WidthMismatch => a.clone(),
        };
        pre_activation.push(z);
        activation.push(a);
        hidden.push(x);
    }
    let out_layer = &params.layers[n_hidden];
    let output = affine(&hidden[n_hidden - 1], &out_layer.weight, &out_layer.bias);
    pre_activation.push(output.clone());

    let cache = ForwardCache {
        fingerprint: params.fingerprint(),
        input: inputs.clone(),
        pre_activation,
        activation,
        hidden,
        output: output.clone(),
    };
    Ok((output, cache))
}

/// Output only, without keeping the cache alive.
pub fn predict(spec: &ArchitectureSpec, params: &ParameterSet, inputs: &Matrix) -> Result<Matrix> {
    forward_batch(spec, params, inputs).map(|(out, _)| out)
}

pub fn forward(
    spec: &ArchitectureSpec,
    params: &ParameterSet,
    x: &[f64],
) -> Result<(Vector, ForwardCache)> {
    let (out, cache) = forward_batch(spec, params, &Matrix::row_vector(x))?;
    Ok((Vector::from(out.into_vec()), cache))
}

/// Back-propagates `upstream = ∂L/∂output` (one row per sample) through the
/// network, summing parameter gradients over the batch.
pub fn backward_batch(
    spec: &ArchitectureSpec,
    params: &ParameterSet,
    cache: &ForwardCache,
    upstream: &Matrix,
) -> Result<Gradients> {
    params.check_shapes(spec)?;
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::contract(
            "forward cache was produced with different parameters",
        ));
    }
    if upstream.shape() != cache.output.shape() {
        return Err(Error::contract(format!(
            "upstream gradient {:?} does not match output {:?}",
            upstream.shape(),
            cache.output.shape()
        )));
    }
    let act = spec.activation;
    let n_hidden = spec.n_hidden();
    let mut grads = ParameterSet::zeros(spec);
    let mut grad_z: Vec<Matrix> = vec![Matrix::zeros(0, 0); n_hidden + 1];

    // Output layer is affine: ∂L/∂z(L+1) = upstream.
    let last_hidden = &cache.hidden[n_hidden - 1];
    grads.layers[n_hidden]
        .weight
        .add_transposed_product(1.0, upstream, last_hidden);
    grads.layers[n_hidden].bias = upstream.column_sums().into();
    let mut grad_x = upstream.mul(&params.layers[n_hidden].weight);
    grad_z[n_hidden] = upstream.clone();

    for l in (1..=n_hidden).rev() {
        let a = &cache.activation[l - 1];
        let prev = cache.layer_output(l - 1);
        // ∂L/∂z(l) = ∂L/∂x(l) ⊙ σ'(z(l))
        let gz = grad_x.zip_map(a, |g, av| g * act.derivatives_from_output(av).0);
        let layer = &params.layers[l - 1];
        grads.layers[l - 1].weight.add_transposed_product(1.0, &gz, prev);
        grads.layers[l - 1].bias = gz.column_sums().into();
        let mut next = gz.mul(&layer.weight);
        if let LayerSkip::Power(p) = spec.layer_skip(l) {
            let pf = f64::from(p);
            for ((n, g), s) in next
                .as_mut_slice()
                .iter_mut()
                .zip(grad_x.as_slice())
                .zip(prev.as_slice())
            {
                *n += g * pf * powi(*s, p - 1);
            }
        }
        grad_z[l - 1] = gz;
        grad_x = next;
    }

    Ok(Gradients {
        params: grads,
        input: grad_x,
        pre_activation: grad_z,
    })
}

pub fn backward(
    spec: &ArchitectureSpec,
    params: &ParameterSet,
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<Gradients> {
    backward_batch(spec, params, cache, &Matrix::row_vector(upstream))
}
