use crate::error::{Error, Result};
use crate::linalg::{glorot_uniform, Matrix, Vector};
use crate::rng::RngStream;

use super::ArchitectureSpec;

/// Weights and biases of one affine layer. `weight` has shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vector,
}

/// Per-layer weights and biases, hidden layers first, output layer last.
///
/// The flat layout used by the optimizers walks layers in order and, within
/// a layer, stores the weight matrix row-major followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub layers: Vec<Layer>,
}

impl ParameterSet {
    pub fn zeros(spec: &ArchitectureSpec) -> Self {
        let layers = (0..spec.n_layers())
            .map(|l| {
                let (rows, cols) = spec.weight_shape(l);
                Layer {
                    weight: Matrix::zeros(rows, cols),
                    bias: Vector::zeros(rows),
                }
            })
            .collect();
        ParameterSet { layers }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot(spec: &ArchitectureSpec, rng: &mut RngStream) -> Result<Self> {
        spec.validate()?;
        let layers = (0..spec.n_layers())
            .map(|l| {
                let (rows, cols) = spec.weight_shape(l);
                Ok(Layer {
                    weight: glorot_uniform(cols, rows, rng)?,
                    bias: Vector::zeros(rows),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ParameterSet { layers })
    }

    /// Every weight and bias drawn uniformly from `[-scale, scale]`.
    pub fn random_uniform(spec: &ArchitectureSpec, scale: f64, rng: &mut RngStream) -> Self {
        let mut p = ParameterSet::zeros(spec);
        for layer in &mut p.layers {
            for v in layer.weight.as_mut_slice() {
                *v = rng.uniform(-scale, scale);
            }
            for v in layer.bias.iter_mut() {
                *v = rng.uniform(-scale, scale);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks every layer shape against `spec`.
    pub fn check_shapes(&self, spec: &ArchitectureSpec) -> Result<()> {
        if self.layers.len() != spec.n_layers() {
            return Err(Error::contract(format!(
                "parameter set has {} layers, architecture needs {}",
                self.layers.len(),
                spec.n_layers()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = spec.weight_shape(l);
            if layer.weight.shape() != (rows, cols) || layer.bias.len() != rows {
                return Err(Error::contract(format!(
                    "layer {} has weight {:?} / bias {}, expected ({rows}, {cols}) / {rows}",
                    l + 1,
                    layer.weight.shape(),
                    layer.bias.len()
                )));
            }
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vector {
        let mut out = Vec::with_capacity(self.len());
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out.into()
    }

    pub fn unflatten(values: &[f64], spec: &ArchitectureSpec) -> Result<Self> {
        let expected = spec.parameter_count();
        if values.len() != expected {
            return Err(Error::contract(format!(
                "flat parameter vector has {} entries, architecture needs {expected}",
                values.len()
            )));
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(spec.n_layers());
        for l in 0..spec.n_layers() {
            let (rows, cols) = spec.weight_shape(l);
            let weight = Matrix::from_vec(rows, cols, values[offset..offset + rows * cols].to_vec())?;
            offset += rows * cols;
            let bias = Vector::from(&values[offset..offset + rows]);
            offset += rows;
            layers.push(Layer { weight, bias });
        }
        Ok(ParameterSet { layers })
    }

    pub fn scale(&self, c: f64) -> Self {
        ParameterSet {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.scale(c),
                    bias: l.bias.iter().map(|v| c * v).collect(),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    /// Hash of the exact bit patterns of every entry, used to detect a
    /// forward cache being replayed against different parameters.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut feed = |v: f64| {
            h ^= v.to_bits();
            h = h.wrapping_mul(PRIME);
        };
        for layer in &self.layers {
            layer.weight.as_slice().iter().copied().for_each(&mut feed);
            layer.bias.iter().copied().for_each(&mut feed);
        }
        h
    }
}

/// Offsets of each layer's weight and bias blocks inside the flat vector.
#[derive(Debug, Clone)]
pub struct FlatLayout {
    pub weight_offsets: Vec<usize>,
    pub bias_offsets: Vec<usize>,
    pub shapes: Vec<(usize, usize)>,
    pub len: usize,
}

impl FlatLayout {
    pub fn new(spec: &ArchitectureSpec) -> Self {
        let mut offset = 0;
        let mut layout = FlatLayout {
            weight_offsets: Vec::new(),
            bias_offsets: Vec::new(),
            shapes: Vec::new(),
            len: 0,
        };
        for l in 0..spec.n_layers() {
            let (rows, cols) = spec.weight_shape(l);
            layout.weight_offsets.push(offset);
            offset += rows * cols;
            layout.bias_offsets.push(offset);
            offset += rows;
            layout.shapes.push((rows, cols));
        }
        layout.len = offset;
        layout
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ArchitectureKind;
    use proptest::prelude::*;

    #[test]
    fn flat_length_matches_count() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 3, 1);
        let p = ParameterSet::zeros(&spec);
        assert_eq!(p.flatten().len(), 13);
        assert_eq!(FlatLayout::new(&spec).len, 13);
    }

    #[test]
    fn zero_vector_gives_zero_parameters() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 4, 1);
        let p = ParameterSet::unflatten(&vec![0.0; spec.parameter_count()], &spec).unwrap();
        assert_eq!(p, ParameterSet::zeros(&spec));
    }

    #[test]
    fn wrong_length_rejected() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 3, 1);
        assert!(matches!(
            ParameterSet::unflatten(&[0.0; 12], &spec),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn layout_is_layer_then_weight_then_bias() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 3, 1);
        let flat: Vec<f64> = (0..13).map(f64::from).collect();
        let p = ParameterSet::unflatten(&flat, &spec).unwrap();
        assert_eq!(p.layers[0].weight.row(0), &[0.0, 1.0]);
        assert_eq!(p.layers[0].bias.as_slice(), &[6.0, 7.0, 8.0]);
        assert_eq!(p.layers[1].weight.row(0), &[9.0, 10.0, 11.0]);
        assert_eq!(p.layers[1].bias.as_slice(), &[12.0]);
    }

    proptest! {
        #[test]
        fn flatten_round_trip_is_exact(seed in any::<u64>(), layers in 1usize..4, width in 1usize..6) {
            let spec = ArchitectureSpec::uniform(ArchitectureKind::ResNet, 3, layers, width, 2);
            let p = ParameterSet::random_uniform(&spec, 3.0, &mut RngStream::new(seed));
            let back = ParameterSet::unflatten(&p.flatten(), &spec).unwrap();
            prop_assert_eq!(back.fingerprint(), p.fingerprint());
            prop_assert_eq!(back, p);
        }
    }
}
