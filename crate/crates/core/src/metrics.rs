//! Error measures and the supervised least-squares objective.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{backward_batch, forward_batch, ArchitectureSpec, ParameterSet};

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::contract(format!(
            "prediction has {} entries, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::contract("metrics need at least one entry"));
    }
    Ok(())
}

/// `(1/n) Σ (uᵢ − Nᵢ)²`.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(s / pred.len() as f64)
}

/// `‖u − N‖₂ / ‖u‖₂`.
pub fn rel_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let den = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
    if !(den > 0.0) {
        return Err(Error::Domain("relative L2 error undefined for a zero reference".into()));
    }
    let num = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// `max |uᵢ − Nᵢ|`.
pub fn max_abs(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).fold(0.0, |m, (p, t)| m.max((t - p).abs())))
}

/// All three measures over one evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub mse: f64,
    /// `None` when the reference is identically zero.
    pub rel_l2: Option<f64>,
    pub max_abs: f64,
    pub n: usize,
}

impl EvalResult {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        Ok(EvalResult {
            mse: mse(pred, truth)?,
            rel_l2: rel_l2(pred, truth).ok(),
            max_abs: max_abs(pred, truth)?,
            n: pred.len(),
        })
    }
}

/// Mean squared error of the network on `train` as a function of the flat
/// parameter vector, with its gradient.
pub fn interpolation_objective<'a>(
    spec: &'a ArchitectureSpec,
    train: &'a Dataset,
) -> Result<impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + 'a> {
    spec.validate()?;
    if spec.output_dim != 1 {
        return Err(Error::Unsupported("interpolation needs a scalar output".into()));
    }
    if spec.input_dim != train.dim() {
        return Err(Error::contract(format!(
            "dataset has {} inputs, architecture expects {}",
            train.dim(),
            spec.input_dim
        )));
    }
    if train.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    let n = train.len();
    Ok(move |theta: &[f64]| {
        let params = ParameterSet::unflatten(theta, spec)?;
        let (out, cache) = forward_batch(spec, &params, &train.inputs)?;
        let residual: Vec<f64> = out.as_slice().iter().zip(&train.targets).map(|(p, t)| p - t).collect();
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / n as f64;
        let upstream = Matrix::from_vec(n, 1, residual.iter().map(|r| 2.0 * r / n as f64).collect())?;
        let grads = backward_batch(spec, &params, &cache, &upstream)?;
        Ok((loss, grads.params.flatten().into_inner()))
    })
}
