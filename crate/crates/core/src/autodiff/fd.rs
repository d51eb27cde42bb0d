use crate::error::{Error, Result};

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// `max_i |analytic_i − fd_i| / max(1, |analytic_i|)`.
    pub max_discrepancy: f64,
    pub worst_index: usize,
}

/// Central-difference gradient of `f` at `point`.
pub fn central_gradient<F>(mut f: F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + step;
        let fp = f(&x);
        x[i] = orig - step;
        let fm = f(&x);
        x[i] = orig;
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

/// Checks the gradient returned by `f` against central differences of its value.
pub fn finite_difference_check<F>(mut f: F, point: &[f64], step: f64) -> Result<FdReport>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(point);
    if analytic.len() != point.len() {
        return Err(Error::contract("gradient length differs from point length"));
    }
    let numeric = central_gradient(|x| f(x).0, point, step)?;
    let mut report = FdReport {
        max_discrepancy: 0.0,
        worst_index: 0,
    };
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let d = (a - n).abs() / a.abs().max(1.0);
        if d > report.max_discrepancy || d.is_nan() {
            report = FdReport {
                max_discrepancy: d,
                worst_index: i,
            };
        }
    }
    Ok(report)
}
