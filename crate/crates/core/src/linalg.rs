//! Dense row-major matrices and vectors.
//!
//! Single-sample arithmetic (`matvec`) is written out directly. Batched
//! products, where rows of a matrix are samples, go through
//! `matrixmultiply`'s packed kernels.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Builds a one-row matrix holding `v`.
    pub fn row_vector(v: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two equally shaped matrices.
    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|v| c * v)
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Sum over rows, giving one value per column.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.data.chunks_exact(self.cols.max(1)) {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    /// `self · otherᵀ`, i.e. every row of `self` multiplied by `other`
    /// interpreted as a weight matrix of shape (out, in).
    pub fn mul_transposed(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "mul_transposed inner dimension");
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(
            1.0,
            MatRef::new(self),
            MatRef::new(other).t(),
            0.0,
            &mut out,
        );
        out
    }

    /// `self · other`.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mul inner dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(1.0, MatRef::new(self), MatRef::new(other), 0.0, &mut out);
        out
    }

    /// `self += alpha · aᵀ · b`.
    pub fn add_transposed_product(&mut self, alpha: f64, a: &Matrix, b: &Matrix) {
        assert_eq!(a.rows, b.rows, "add_transposed_product row mismatch");
        assert_eq!(self.shape(), (a.cols, b.cols), "add_transposed_product output");
        gemm(alpha, MatRef::new(a).t(), MatRef::new(b), 1.0, self);
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// A strided read-only view used to express transposes without copying.
#[derive(Clone, Copy)]
struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> MatRef<'a> {
    fn new(m: &'a Matrix) -> Self {
        MatRef {
            data: &m.data,
            rows: m.rows,
            cols: m.cols,
            row_stride: m.cols as isize,
            col_stride: 1,
        }
    }

    fn t(self) -> Self {
        MatRef {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }
}

/// `c = alpha · a · b + beta · c`
fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows);
    assert_eq!((a.rows, b.cols), c.shape());
    assert_eq!(a.data.len(), a.rows * a.cols);
    assert_eq!(b.data.len(), b.rows * b.cols);
    if c.data.is_empty() {
        return;
    }
    if a.cols == 0 {
        for v in &mut c.data {
            *v *= beta;
        }
        return;
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    // SAFETY: shapes and buffer lengths are checked above; the strides
    // describe dense row-major buffers (or their transposes) of exactly
    // those shapes, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// Matrix-vector product.
pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if m.cols != v.len() {
        return Err(Error::contract(format!(
            "matvec: matrix has {} columns, vector has {} entries",
            m.cols,
            v.len()
        )));
    }
    Ok((0..m.rows).map(|i| dot(m.row(i), v)).collect())
}

/// Root of the sum of squared entries over every supplied matrix.
pub fn frobenius_norm<'a, I>(matrices: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Matrix>,
{
    let mut any = false;
    let mut sum = 0.0;
    for m in matrices {
        any = true;
        sum += m.data.iter().map(|v| v * v).sum::<f64>();
    }
    if !any {
        return Err(Error::contract("frobenius_norm of an empty collection"));
    }
    Ok(sum.sqrt())
}

/// A `fan_out × fan_in` matrix with entries uniform on `[-a, a]`,
/// `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::contract("glorot_uniform needs fan_in, fan_out >= 1"));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform(-bound, bound))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_examples() {
        let v = [3.0, 4.0];
        assert_eq!(matvec(&Matrix::identity(2), &v).unwrap().as_slice(), &[3.0, 4.0]);
        assert_eq!(matvec(&Matrix::zeros(2, 2), &v).unwrap().as_slice(), &[0.0, 0.0]);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&m, &[1.0, 1.0]).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let err = matvec(&Matrix::zeros(2, 3), &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn frobenius_examples() {
        let m = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_norm([&m]).unwrap(), 5.0);
        assert_eq!(frobenius_norm([&Matrix::zeros(3, 2)]).unwrap(), 0.0);
        let a = Matrix::filled(1, 1, 1.0);
        let b = Matrix::filled(1, 1, 2.0);
        assert!((frobenius_norm([&a, &b]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(frobenius_norm(std::iter::empty::<&Matrix>()).is_err());
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut r1 = RngStream::new(7);
        let mut r2 = RngStream::new(7);
        let a = glorot_uniform(3, 3, &mut r1).unwrap();
        let b = glorot_uniform(3, 3, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(glorot_uniform(0, 3, &mut r1).is_err());
    }

    #[test]
    fn glorot_sample_mean() {
        // 10^4 draws from U[-a, a] with a = sqrt(6/100): sigma of the mean is a/sqrt(3)/100.
        let mut rng = RngStream::new(11);
        let mut draws = Vec::new();
        while draws.len() < 10_000 {
            draws.extend_from_slice(glorot_uniform(50, 50, &mut rng).unwrap().as_slice());
        }
        draws.truncate(10_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let a = (6.0f64 / 100.0).sqrt();
        let sigma_mean = a / 3f64.sqrt() / 100.0;
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
    }

    #[test]
    fn batched_products_match_loops() {
        let mut rng = RngStream::new(3);
        let rand = |r: usize, c: usize, rng: &mut RngStream| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
        };
        let x = rand(5, 4, &mut rng);
        let w = rand(3, 4, &mut rng);
        let z = x.mul_transposed(&w);
        for i in 0..5 {
            let row = matvec(&w, x.row(i)).unwrap();
            for j in 0..3 {
                assert!((z[(i, j)] - row[j]).abs() < 1e-14);
            }
        }
        let y = x.mul(&w.transpose());
        assert!(y.zip_map(&z, |a, b| (a - b).abs()).as_slice().iter().all(|d| *d < 1e-14));
        let mut acc = Matrix::zeros(4, 3);
        acc.add_transposed_product(2.0, &x, &z);
        let direct = x.transpose().mul(&z).scale(2.0);
        assert!(acc.zip_map(&direct, |a, b| (a - b).abs()).as_slice().iter().all(|d| *d < 1e-13));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, n)
        }

        proptest! {
            #[test]
            fn matvec_distributes(m in entries(12), a in entries(4), b in entries(4)) {
                let m = Matrix::from_vec(3, 4, m).unwrap();
                let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                let lhs = matvec(&m, &ab).unwrap();
                let fa = matvec(&m, &a).unwrap();
                let fb = matvec(&m, &b).unwrap();
                let scale = 1.0 + m.as_slice().iter().fold(0.0f64, |s, v| s.max(v.abs()))
                    * ab.iter().chain(&a).chain(&b).fold(0.0f64, |s, v| s.max(v.abs())) * 4.0;
                for i in 0..3 {
                    prop_assert!((lhs[i] - fa[i] - fb[i]).abs() <= 1e-12 * scale);
                }
            }

            #[test]
            fn frobenius_homogeneous(m in entries(6), c in -5.0f64..5.0) {
                let m = Matrix::from_vec(2, 3, m).unwrap();
                let n = frobenius_norm([&m]).unwrap();
                let nc = frobenius_norm([&m.scale(c)]).unwrap();
                prop_assert!((nc - c.abs() * n).abs() <= 1e-12 * (c.abs() * n).max(f64::MIN_POSITIVE));
            }
        }
    }
}
