use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Franke's smooth bivariate test function.
pub fn f1(x1: f64, x2: f64) -> f64 {
    let a = 9.0 * x1;
    let b = 9.0 * x2;
    0.75 * (-0.25 * ((a - 2.0).powi(2) + (b - 2.0).powi(2))).exp()
        + 0.75 * (-(a + 1.0).powi(2) / 49.0 - (b + 1.0).powi(2) / 10.0).exp()
        + 0.5 * (-0.25 * ((a - 7.0).powi(2) + (b - 3.0).powi(2))).exp()
        - 0.2 * (-(a - 4.0).powi(2) - (b - 7.0).powi(2)).exp()
}

/// Steep function with a pole just outside the unit square at (1.01, 1.01).
pub fn f2(x1: f64, x2: f64) -> f64 {
    0.0025 / ((x1 - 1.01).powi(2) + (x2 - 1.01).powi(2))
}

/// Pyramid with a kink along `|x1 − ½| + |x2 − ½| = const`.
pub fn f3(x1: f64, x2: f64) -> f64 {
    (64.0 - 81.0 * ((x1 - 0.5).abs() + (x2 - 0.5).abs())) / 9.0 - 0.5
}

/// Isotropic Gaussian bump centred at (½, ½, ½).
pub fn f4(x1: f64, x2: f64, x3: f64) -> f64 {
    let r2 = (x1 - 0.5).powi(2) + (x2 - 0.5).powi(2) + (x3 - 0.5).powi(2);
    (-81.0 / 16.0 * r2).exp() / 3.0
}

/// The closed-form benchmark targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    F1,
    F2,
    F3,
    F4,
}

impl TestFunction {
    pub fn dim(self) -> usize {
        match self {
            TestFunction::F4 => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::F1 => "f1",
            TestFunction::F2 => "f2",
            TestFunction::F3 => "f3",
            TestFunction::F4 => "f4",
        }
    }

    /// Panics if `x.len() != self.dim()`.
    pub fn eval(self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "{} takes {} coordinates", self.name(), self.dim());
        match self {
            TestFunction::F1 => f1(x[0], x[1]),
            TestFunction::F2 => f2(x[0], x[1]),
            TestFunction::F3 => f3(x[0], x[1]),
            TestFunction::F4 => f4(x[0], x[1], x[2]),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" | "franke" => Ok(TestFunction::F1),
            "f2" => Ok(TestFunction::F2),
            "f3" => Ok(TestFunction::F3),
            "f4" => Ok(TestFunction::F4),
            _ => Err(Error::contract(format!("unknown test function '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn f3_at_kink() {
        assert!((f3(0.5, 0.5) - (64.0 / 9.0 - 0.5)).abs() < 1e-15);
        assert!((f3(0.5, 0.5) - 6.611_111_111_111_111).abs() < 1e-12);
    }

    #[test]
    fn f2_at_origin() {
        let expected = 0.0025 / (2.0 * 1.0201);
        assert!((f2(0.0, 0.0) - expected).abs() < 1e-18);
        assert!((f2(0.0, 0.0) - 1.225_37e-3).abs() < 1e-8);
    }

    #[test]
    fn f1_at_centre() {
        // At (4.5, 4.5) the exponents are 3.125, 30.25/49 + 30.25/10, 2.125 and 6.5.
        let expected = 0.75 * (-3.125f64).exp() + 0.75 * (-30.25 / 49.0 - 3.025f64).exp()
            + 0.5 * (-2.125f64).exp()
            - 0.2 * (-6.5f64).exp();
        assert!((f1(0.5, 0.5) - expected).abs() < 1e-15);
        assert!((f1(0.5, 0.5) - 0.112_011_599_186_602_36).abs() < 1e-12);
    }

    #[test]
    fn f4_examples() {
        assert!((f4(0.5, 0.5, 0.5) - 1.0 / 3.0).abs() < 1e-16);
        let expected = (-81.0 * 0.75 / 16.0f64).exp() / 3.0;
        assert!((f4(0.0, 0.0, 0.0) - expected).abs() < 1e-16);
        let mut rng = RngStream::new(1);
        for _ in 0..20 {
            let (a, b, c) = (rng.next_f64(), rng.next_f64(), rng.next_f64());
            let v = f4(a, b, c);
            for w in [f4(b, a, c), f4(c, b, a), f4(a, c, b), f4(b, c, a)] {
                assert!((v - w).abs() < 1e-16);
            }
        }
    }

    /// Second transcription: F1 written as a sum over a coefficient table,
    /// F2 and F3 via alternative algebra.
    #[test]
    fn independent_transcription_agrees() {
        // (coef, cx, cy, sx, sy) in coef·exp(−sx(9x−cx)² − sy(9y−cy)²)
        let table = [
            (0.75, 2.0, 2.0, 0.25, 0.25),
            (0.75, -1.0, -1.0, 1.0 / 49.0, 0.1),
            (0.5, 7.0, 3.0, 0.25, 0.25),
            (-0.2, 4.0, 7.0, 1.0, 1.0),
        ];
        let f1_alt = |x: f64, y: f64| -> f64 {
            table
                .iter()
                .map(|&(c, cx, cy, sx, sy)| {
                    c * (-sx * (9.0 * x - cx).powi(2) - sy * (9.0 * y - cy).powi(2)).exp()
                })
                .sum()
        };
        let f2_alt = |x: f64, y: f64| 1.0 / (400.0 * ((1.01 - x).powi(2) + (1.01 - y).powi(2)));
        let f3_alt = |x: f64, y: f64| 64.0 / 9.0 - 9.0 * ((x - 0.5).abs() + (y - 0.5).abs()) - 0.5;
        let mut rng = RngStream::new(99);
        for _ in 0..100 {
            let (x, y) = (rng.next_f64(), rng.next_f64());
            assert!((f1(x, y) - f1_alt(x, y)).abs() < 1e-12);
            assert!((f2(x, y) - f2_alt(x, y)).abs() < 1e-12 * f2(x, y).max(1.0));
            assert!((f3(x, y) - f3_alt(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("F3".parse::<TestFunction>().unwrap(), TestFunction::F3);
        assert!("f9".parse::<TestFunction>().is_err());
    }
}
