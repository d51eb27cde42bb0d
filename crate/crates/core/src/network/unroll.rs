//! Fully expanded three-hidden-layer forms, written out term by term with no
//! shared subexpressions. They serve as an oracle for [`super::forward`].

use crate::error::{Error, Result};
use crate::linalg::{matvec, Vector};

use super::{Activation, ArchitectureKind, ParameterSet};

fn add(a: &Vector, b: &Vector) -> Vector {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

fn pow(a: &Vector, p: u32) -> Vector {
    a.iter().map(|v| v.powi(p as i32)).collect()
}

/// Output of the third hidden layer for input `x`.
///
/// Requires exactly three hidden layers of width `x.len()`. `SkipResNet`
/// uses the power form with `p = 1`.
pub fn unroll3(
    kind: ArchitectureKind,
    params: &ParameterSet,
    activation: Activation,
    x: &[f64],
    p: u32,
) -> Result<Vector> {
    if params.layers.len() != 4 {
        return Err(Error::contract(format!(
            "unroll3 needs exactly 3 hidden layers, got {}",
            params.layers.len().saturating_sub(1)
        )));
    }
    let d = x.len();
    for layer in &params.layers[..3] {
        if layer.weight.shape() != (d, d) {
            return Err(Error::contract("unroll3 needs hidden widths equal to the input dimension"));
        }
    }
    // f_l(v) = σ(W(l) v + b(l))
    let f = |l: usize, v: &Vector| -> Vector {
        let layer = &params.layers[l - 1];
        matvec(&layer.weight, v)
            .expect("shape checked")
            .iter()
            .zip(layer.bias.iter())
            .map(|(z, b)| activation.apply(z + b))
            .collect()
    };
    let x0 = Vector::from(x);

    let out = match kind {
        ArchitectureKind::Plain => f(3, &f(2, &f(1, &x0))),
        ArchitectureKind::ResNet => {
            // f3(f2(f1(x0) + x0) + f1(x0) + x0) + [f2(f1(x0) + x0) + f1(x0) + x0]
            let inner = add(
                &add(&f(2, &add(&f(1, &x0), &x0)), &f(1, &x0)),
                &x0,
            );
            let bracket = add(
                &add(&f(2, &add(&f(1, &x0), &x0)), &f(1, &x0)),
                &x0,
            );
            add(&f(3, &inner), &bracket)
        }
        ArchitectureKind::SkipResNet | ArchitectureKind::SqrSkipResNet => {
            let p = if kind == ArchitectureKind::SkipResNet { 1 } else { p };
            // f3(f2(f1(x0) + x0^p)) + [f2(f1(x0) + x0^p)]^p
            let first = f(3, &f(2, &add(&f(1, &x0), &pow(&x0, p))));
            let second = pow(&f(2, &add(&f(1, &x0), &pow(&x0, p))), p);
            add(&first, &second)
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, ArchitectureSpec};
    use crate::rng::RngStream;

    #[test]
    fn matches_forward_for_every_kind() {
        let mut rng = RngStream::new(21);
        for kind in ArchitectureKind::ALL {
            let spec = ArchitectureSpec::uniform(kind, 3, 3, 3, 1);
            for _ in 0..10 {
                let p = ParameterSet::random_uniform(&spec, 1.0, &mut rng);
                let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let (_, cache) = forward(&spec, &p, &x).unwrap();
                let u = unroll3(kind, &p, spec.activation, &x, spec.power).unwrap();
                for (a, b) in u.iter().zip(cache.hidden[2].as_slice()) {
                    assert!((a - b).abs() <= 1e-12, "{kind}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn wrong_depth_is_rejected() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 2, 2, 1);
        let p = ParameterSet::zeros(&spec);
        assert!(matches!(
            unroll3(ArchitectureKind::Plain, &p, Activation::Tanh, &[0.0, 0.0], 2),
            Err(Error::Contract(_))
        ));
    }
}
