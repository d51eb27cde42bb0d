use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngStream;

/// Axis-aligned box, one `[lo, hi]` per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::contract("domain needs at least one dimension"));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::contract(format!("dimension {i}: need lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(Domain { bounds })
    }

    /// `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        Domain {
            bounds: vec![(0.0, 1.0); d.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
    }
}

/// `n` i.i.d. uniform points, one per row.
pub fn sample_uniform(domain: &Domain, n: usize, rng: &mut RngStream) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::contract("sample size must be >= 1"));
    }
    let d = domain.dim();
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        for (j, &(lo, hi)) in domain.bounds.iter().enumerate() {
            out[(i, j)] = rng.uniform(lo, hi);
        }
    }
    Ok(out)
}

/// Tensor-product lattice including the endpoints. The last coordinate
/// varies fastest.
pub fn grid(domain: &Domain, counts: &[usize]) -> Result<Matrix> {
    if counts.len() != domain.dim() {
        return Err(Error::contract(format!(
            "grid needs {} counts, got {}",
            domain.dim(),
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::contract("grid counts must be >= 2"));
    }
    let axes: Vec<Vec<f64>> = domain
        .bounds
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &c)| linspace(lo, hi, c))
        .collect();
    let total: usize = counts.iter().product();
    let d = counts.len();
    let mut out = Matrix::zeros(total, d);
    let mut idx = vec![0usize; d];
    for row in 0..total {
        for j in 0..d {
            out[(row, j)] = axes[j][idx[j]];
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(out)
}

/// `n` evenly spaced values with exact endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Latin hypercube sample: each axis is cut into `n` strata and every
/// stratum receives exactly one point.
pub fn latin_hypercube(domain: &Domain, n: usize, rng: &mut RngStream) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::contract("sample size must be >= 1"));
    }
    let d = domain.dim();
    let mut out = Matrix::zeros(n, d);
    for (j, &(lo, hi)) in domain.bounds.iter().enumerate() {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        for (i, &k) in perm.iter().enumerate() {
            let u = (k as f64 + rng.next_f64()) / n as f64;
            out[(i, j)] = lo + (hi - lo) * u;
        }
    }
    Ok(out)
}
