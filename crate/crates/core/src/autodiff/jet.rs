use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::network::{ArchitectureSpec, LayerSkip, ParameterSet};

/// Truncated second-order Taylor number.
///
/// Carries a value, first derivatives along two input directions, and the
/// second derivative along the first direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub value: f64,
    pub d1: [f64; 2],
    pub d2: f64,
}

impl Jet2 {
    pub fn constant(value: f64) -> Self {
        Jet2 {
            value,
            ..Default::default()
        }
    }

    /// An input coordinate. `seed[k]` is its derivative along direction `k`.
    pub fn variable(value: f64, seed: [f64; 2]) -> Self {
        Jet2 {
            value,
            d1: seed,
            d2: 0.0,
        }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    #[inline]
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Jet2 {
            value: f,
            d1: [df * self.d1[0], df * self.d1[1]],
            d2: df * self.d2 + d2f * self.d1[0] * self.d1[0],
        }
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        let s1 = 1.0 - t * t;
        self.chain(t, s1, -2.0 * t * s1)
    }

    pub fn powi(self, p: u32) -> Self {
        let x = self.value;
        let pf = f64::from(p);
        let f = x.powi(p as i32);
        let df = if p >= 1 { pf * x.powi(p as i32 - 1) } else { 0.0 };
        let d2f = if p >= 2 { pf * (pf - 1.0) * x.powi(p as i32 - 2) } else { 0.0 };
        self.chain(f, df, d2f)
    }

    pub fn scale(self, c: f64) -> Self {
        Jet2 {
            value: c * self.value,
            d1: [c * self.d1[0], c * self.d1[1]],
            d2: c * self.d2,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            value: self.value + o.value,
            d1: [self.d1[0] + o.d1[0], self.d1[1] + o.d1[1]],
            d2: self.d2 + o.d2,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            value: self.value * o.value,
            d1: [
                self.d1[0] * o.value + self.value * o.d1[0],
                self.d1[1] * o.value + self.value * o.d1[1],
            ],
            d2: self.value * o.d2 + 2.0 * self.d1[0] * o.d1[0] + self.d2 * o.value,
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        Jet2 {
            value: self.value + c,
            ..self
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

/// Network output and its input derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetOutput {
    pub value: f64,
    /// First derivative along each requested direction.
    pub d1: [f64; 2],
    /// Second derivative along the first requested direction.
    pub d2: f64,
}

/// Evaluates a scalar-output network at `x` together with `∂N/∂e_a`,
/// `∂N/∂e_b` and `∂²N/∂e_a²` for the coordinate axes `directions = [a, b]`.
pub fn jet_forward(
    spec: &ArchitectureSpec,
    params: &ParameterSet,
    x: &[f64],
    directions: [usize; 2],
) -> Result<JetOutput> {
    spec.validate()?;
    params.check_shapes(spec)?;
    if spec.output_dim != 1 {
        return Err(Error::Unsupported(format!(
            "input jets need a scalar output, architecture has {}",
            spec.output_dim
        )));
    }
    if x.len() != spec.input_dim {
        return Err(Error::contract("input length does not match architecture"));
    }
    if directions.iter().any(|&d| d >= spec.input_dim) {
        return Err(Error::contract("jet direction is not an input axis"));
    }
    let mut cur: Vec<Jet2> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let seed = [
                if i == directions[0] { 1.0 } else { 0.0 },
                if i == directions[1] { 1.0 } else { 0.0 },
            ];
            Jet2::variable(v, seed)
        })
        .collect();

    let affine = |l: usize, input: &[Jet2]| -> Vec<Jet2> {
        let layer = &params.layers[l];
        (0..layer.weight.rows())
            .map(|i| {
                layer
                    .weight
                    .row(i)
                    .iter()
                    .zip(input)
                    .fold(Jet2::constant(layer.bias[i]), |acc, (&w, &v)| acc + v * w)
            })
            .collect()
    };

    for l in 1..=spec.n_hidden() {
        let z = affine(l - 1, &cur);
        let mut next: Vec<Jet2> = z
            .into_iter()
            .map(|zj| {
                let a = spec.activation.apply(zj.value);
                let (s1, s2) = spec.activation.derivatives_from_output(a);
                zj.chain(a, s1, s2)
            })
            .collect();
        if let LayerSkip::Power(p) = spec.layer_skip(l) {
            for (n, s) in next.iter_mut().zip(&cur) {
                *n = *n + s.powi(p);
            }
        }
        cur = next;
    }
    let out = affine(spec.n_hidden(), &cur)[0];
    Ok(JetOutput {
        value: out.value,
        d1: out.d1,
        d2: out.d2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::network::{forward, Activation, ArchitectureKind};
    use crate::rng::RngStream;

    #[test]
    fn product_rule() {
        let a = Jet2 { value: 2.0, d1: [1.0, 0.5], d2: 3.0 };
        let b = Jet2 { value: -1.0, d1: [4.0, 2.0], d2: 0.25 };
        let p = a * b;
        assert_eq!(p.value, -2.0);
        assert_eq!(p.d1, [1.0 * -1.0 + 2.0 * 4.0, 0.5 * -1.0 + 2.0 * 2.0]);
        assert_eq!(p.d2, 2.0 * 0.25 + 2.0 * 1.0 * 4.0 + 3.0 * -1.0);
    }

    #[test]
    fn tanh_rule() {
        let x = Jet2::variable(0.3, [1.0, 0.0]);
        let t = x.tanh();
        let s = 1.0 - 0.3f64.tanh().powi(2);
        assert!((t.d1[0] - s).abs() < 1e-15);
        assert!((t.d2 + 2.0 * 0.3f64.tanh() * s).abs() < 1e-15);
    }

    #[test]
    fn zero_network_has_zero_jet() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 4, 1);
        let out = jet_forward(&spec, &ParameterSet::zeros(&spec), &[0.3, -0.2], [0, 1]).unwrap();
        assert_eq!(out, JetOutput { value: 0.0, d1: [0.0, 0.0], d2: 0.0 });
    }

    #[test]
    fn linear_network_derivatives() {
        // identity hidden layer of width 1: N(x) = 3 x1 + 2 x2
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 1, 1)
            .with_activation(Activation::Identity);
        let mut p = ParameterSet::zeros(&spec);
        p.layers[0].weight = Matrix::from_rows(&[vec![3.0, 2.0]]).unwrap();
        p.layers[1].weight = Matrix::filled(1, 1, 1.0);
        let out = jet_forward(&spec, &p, &[0.7, -1.1], [0, 1]).unwrap();
        assert_eq!(out.d1, [3.0, 2.0]);
        assert_eq!(out.d2, 0.0);
    }

    #[test]
    fn vector_output_is_unsupported() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 3, 2);
        let err = jet_forward(&spec, &ParameterSet::zeros(&spec), &[0.0, 0.0], [0, 1]).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn value_matches_forward_and_finite_differences() {
        let mut rng = RngStream::new(17);
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 5, 1);
        let p = ParameterSet::glorot(&spec, &mut rng).unwrap();
        let x = [0.35, 0.6];
        let out = jet_forward(&spec, &p, &x, [0, 1]).unwrap();
        let f = |a: f64, b: f64| forward(&spec, &p, &[a, b]).unwrap().0[0];
        assert!((out.value - f(x[0], x[1])).abs() < 1e-14);
        let h = 1e-5;
        let dx = (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2.0 * h);
        let dt = (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h);
        let h2 = 1e-4;
        let dxx = (f(x[0] + h2, x[1]) - 2.0 * f(x[0], x[1]) + f(x[0] - h2, x[1])) / (h2 * h2);
        assert!((out.d1[0] - dx).abs() < 1e-8 * (1.0 + dx.abs()));
        assert!((out.d1[1] - dt).abs() < 1e-8 * (1.0 + dt.abs()));
        assert!((out.d2 - dxx).abs() < 1e-5 * (1.0 + dxx.abs()));
    }
}
