use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngStream;

use super::functions::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Full,
    Train,
    Validation,
}

/// `forward(v) = (v − shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub shift: f64,
    pub scale: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { shift: 0.0, scale: 1.0 };

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.shift) / self.scale
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.scale + self.shift
    }

    /// `self` applied after `inner`.
    fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            shift: inner.shift + inner.scale * self.shift,
            scale: inner.scale * self.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationScheme {
    None,
    /// Each input column mapped onto [0, 1].
    InputUnitBox,
    /// Targets shifted and scaled to mean 0, standard deviation 1.
    TargetZscore,
}

impl FromStr for NormalizationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(NormalizationScheme::None),
            "input_unit_box" => Ok(NormalizationScheme::InputUnitBox),
            "target_zscore" => Ok(NormalizationScheme::TargetZscore),
            _ => Err(Error::contract(format!("unknown normalization scheme '{s}'"))),
        }
    }
}

impl fmt::Display for NormalizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationScheme::None => "none",
            NormalizationScheme::InputUnitBox => "input_unit_box",
            NormalizationScheme::TargetZscore => "target_zscore",
        })
    }
}

/// Maps from raw to normalized units. Fitted on one dataset, applicable to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub inputs: Vec<AffineMap>,
    pub target: AffineMap,
}

impl Normalization {
    pub fn identity(d: usize) -> Self {
        Normalization {
            inputs: vec![AffineMap::IDENTITY; d],
            target: AffineMap::IDENTITY,
        }
    }

    pub fn apply_inputs(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.inputs) {
                *v = m.forward(*v);
            }
        }
        Ok(out)
    }

    pub fn invert_inputs(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.inputs) {
                *v = m.inverse(*v);
            }
        }
        Ok(out)
    }

    pub fn apply_targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| self.target.forward(*v)).collect()
    }

    pub fn invert_targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| self.target.inverse(*v)).collect()
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.inputs.len() {
            return Err(Error::contract(format!(
                "normalization fitted on {} columns, got {}",
                self.inputs.len(),
                x.cols()
            )));
        }
        Ok(())
    }
}

/// Inputs (one row per sample) and scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
    /// Maps that produced `inputs`/`targets` from raw values.
    pub normalization: Normalization,
    pub tag: SplitTag,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Vec<f64>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::contract("dataset must contain at least one sample"));
        }
        if inputs.rows() != targets.len() {
            return Err(Error::contract(format!(
                "{} input rows but {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        if !inputs.is_finite() || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        let d = inputs.cols();
        Ok(Dataset {
            inputs,
            targets,
            normalization: Normalization::identity(d),
            tag: SplitTag::Full,
        })
    }

    /// Evaluates `f` at every row of `inputs`.
    pub fn from_function(f: TestFunction, inputs: Matrix) -> Result<Self> {
        if inputs.cols() != f.dim() {
            return Err(Error::contract(format!("{f} takes {} coordinates, got {}", f.dim(), inputs.cols())));
        }
        let targets = (0..inputs.rows()).map(|i| f.eval(inputs.row(i))).collect();
        Dataset::new(inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    fn subset(&self, rows: &[usize], tag: SplitTag) -> Dataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(self.inputs.row(r));
        }
        Dataset {
            inputs: Matrix::from_vec(rows.len(), d, data).expect("row-major subset"),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            normalization: self.normalization.clone(),
            tag,
        }
    }

    /// Random disjoint split with `n_train` training rows; the rest validate.
    /// Row order within each part follows the original order.
    pub fn split(&self, n_train: usize, rng: &mut RngStream) -> Result<(Dataset, Dataset)> {
        let n = self.len();
        if n_train == 0 || n_train >= n {
            return Err(Error::contract(format!("n_train must be in 1..{n}, got {n_train}")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let mut train = perm[..n_train].to_vec();
        let mut val = perm[n_train..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        Ok((self.subset(&train, SplitTag::Train), self.subset(&val, SplitTag::Validation)))
    }

    /// Fits `scheme` on this dataset and returns the transformed copy. The
    /// returned `normalization` composes with any earlier one, so it always
    /// maps raw units to the new values.
    pub fn normalize(&self, scheme: NormalizationScheme) -> Result<Dataset> {
        let fitted = self.fit(scheme)?;
        let inputs = fitted.apply_inputs(&self.inputs)?;
        let targets = fitted.apply_targets(&self.targets);
        let composed = Normalization {
            inputs: fitted
                .inputs
                .iter()
                .zip(&self.normalization.inputs)
                .map(|(new, old)| new.after(old))
                .collect(),
            target: fitted.target.after(&self.normalization.target),
        };
        Ok(Dataset {
            inputs,
            targets,
            normalization: composed,
            tag: self.tag,
        })
    }

    /// Applies several schemes in order.
    pub fn normalize_all(&self, schemes: &[NormalizationScheme]) -> Result<Dataset> {
        schemes.iter().try_fold(self.clone(), |ds, s| ds.normalize(*s))
    }

    fn fit(&self, scheme: NormalizationScheme) -> Result<Normalization> {
        let mut norm = Normalization::identity(self.dim());
        match scheme {
            NormalizationScheme::None => {}
            NormalizationScheme::InputUnitBox => {
                for j in 0..self.dim() {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for i in 0..self.len() {
                        lo = lo.min(self.inputs[(i, j)]);
                        hi = hi.max(self.inputs[(i, j)]);
                    }
                    if !(hi > lo) {
                        return Err(Error::Domain(format!("input column {j} is constant")));
                    }
                    norm.inputs[j] = AffineMap { shift: lo, scale: hi - lo };
                }
            }
            NormalizationScheme::TargetZscore => {
                let n = self.len() as f64;
                let mean = self.targets.iter().sum::<f64>() / n;
                let var = self.targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if !(sd > 0.0) {
                    return Err(Error::Domain("targets are constant".into()));
                }
                norm.target = AffineMap { shift: mean, scale: sd };
            }
        }
        Ok(norm)
    }

    /// Inputs and targets in raw units.
    pub fn raw(&self) -> Result<(Matrix, Vec<f64>)> {
        Ok((
            self.normalization.invert_inputs(&self.inputs)?,
            self.normalization.invert_targets(&self.targets),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sampling::{sample_uniform, Domain};
    use proptest::prelude::*;

    fn sample(n: usize, seed: u64) -> Dataset {
        let x = sample_uniform(&Domain::new(vec![(-3.0, 7.0), (10.0, 12.0)]).unwrap(), n, &mut RngStream::new(seed)).unwrap();
        let y = (0..n).map(|i| 100.0 + 5.0 * x[(i, 0)] - x[(i, 1)].powi(2)).collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn split_sizes_match_elevation_protocol() {
        let ds = sample(5307, 1);
        let (tr, va) = ds.split(200, &mut RngStream::new(2)).unwrap();
        assert_eq!((tr.len(), va.len()), (200, 5107));
        assert_eq!((tr.tag, va.tag), (SplitTag::Train, SplitTag::Validation));
        let (tr, va) = ds.split(5306, &mut RngStream::new(2)).unwrap();
        assert_eq!((tr.len(), va.len()), (5306, 1));
        assert!(ds.split(0, &mut RngStream::new(2)).is_err());
        assert!(ds.split(5307, &mut RngStream::new(2)).is_err());
    }

    #[test]
    fn split_is_an_exhaustive_partition() {
        let ds = sample(300, 3);
        let (tr, va) = ds.split(120, &mut RngStream::new(4)).unwrap();
        let mut all: Vec<u64> = tr.targets.iter().chain(&va.targets).map(|v| v.to_bits()).collect();
        let mut orig: Vec<u64> = ds.targets.iter().map(|v| v.to_bits()).collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);
        let (tr2, _) = ds.split(120, &mut RngStream::new(4)).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn unit_box_maps_extremes() {
        let ds = sample(200, 5).normalize(NormalizationScheme::InputUnitBox).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..ds.len()).map(|i| ds.inputs[(i, j)]).collect();
            assert_eq!(col.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert!((col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zscore_moments() {
        let ds = sample(400, 6).normalize(NormalizationScheme::TargetZscore).unwrap();
        let n = ds.len() as f64;
        let mean = ds.targets.iter().sum::<f64>() / n;
        let sd = (ds.targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_column_rejected() {
        let ds = Dataset::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap(), vec![0.0, 1.0]).unwrap();
        assert!(ds.normalize(NormalizationScheme::InputUnitBox).is_err());
        let flat = Dataset::new(Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(), vec![2.0, 2.0]).unwrap();
        assert!(flat.normalize(NormalizationScheme::TargetZscore).is_err());
    }

    #[test]
    fn single_row_dataset_is_valid() {
        let ds = Dataset::new(Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap(), vec![1.0]).unwrap();
        assert_eq!(ds.len(), 1);
    }

    proptest! {
        #[test]
        fn normalization_round_trip(seed in 0u64..1000, n in 2usize..60) {
            let ds = sample(n, seed);
            let norm = ds.normalize_all(&[NormalizationScheme::InputUnitBox, NormalizationScheme::TargetZscore]).unwrap();
            let (x, y) = norm.raw().unwrap();
            for (a, b) in x.as_slice().iter().zip(ds.inputs.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            for (a, b) in y.iter().zip(&ds.targets) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
