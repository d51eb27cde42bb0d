use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How hidden layers are combined with their input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchitectureKind {
    /// `x(l) = f(x(l-1))` everywhere.
    Plain,
    /// `x(l) = f(x(l-1)) + x(l-1)` at every hidden layer.
    ResNet,
    /// `x(l) = f(x(l-1)) + x(l-1)` at odd hidden layers only.
    SkipResNet,
    /// `x(l) = f(x(l-1)) + x(l-1)^p` (element-wise) at odd hidden layers only.
    SqrSkipResNet,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 4] = [
        ArchitectureKind::Plain,
        ArchitectureKind::ResNet,
        ArchitectureKind::SkipResNet,
        ArchitectureKind::SqrSkipResNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::Plain => "plain",
            ArchitectureKind::ResNet => "resnet",
            ArchitectureKind::SkipResNet => "skip_resnet",
            ArchitectureKind::SqrSkipResNet => "sqr_skip_resnet",
        }
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "plain" | "plain_nn" | "mlp" => Ok(ArchitectureKind::Plain),
            "resnet" => Ok(ArchitectureKind::ResNet),
            "skip_resnet" | "skipresnet" => Ok(ArchitectureKind::SkipResNet),
            "sqr_skip_resnet" | "sqr_skipresnet" | "sqrskipresnet" | "sqr" => {
                Ok(ArchitectureKind::SqrSkipResNet)
            }
            _ => Err(Error::contract(format!("unknown architecture kind '{s}'"))),
        }
    }
}

/// Hidden-layer activation. Only `Tanh` is used for training; `Identity`
/// makes networks linear, which some tests rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// First and second derivative expressed through the activated value `a`.
    #[inline]
    pub fn derivatives_from_output(self, a: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - a * a;
                (d1, -2.0 * a * d1)
            }
            Activation::Identity => (1.0, 0.0),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            _ => Err(Error::contract(format!("unknown activation '{s}'"))),
        }
    }
}

/// Everything that fixes the forward map apart from the parameter values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArchitectureSpec {
    pub kind: ArchitectureKind,
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    /// Exponent of the skip path. Only read for `SqrSkipResNet`.
    pub power: u32,
    pub activation: Activation,
    /// When false, every residual addition is dropped and the network
    /// evaluates as `Plain` regardless of `kind`.
    pub residuals: bool,
}

/// What a hidden layer adds to its transformed output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSkip {
    None,
    /// Adds `x(l-1)^p` element-wise.
    Power(u32),
    /// The architecture asks for an addition here but the operand widths differ,
    /// so the layer runs without it.
    WidthMismatch,
}

impl ArchitectureSpec {
    /// `n_layers` hidden layers of `width` neurons, tanh, default power 2.
    pub fn uniform(
        kind: ArchitectureKind,
        input_dim: usize,
        n_layers: usize,
        width: usize,
        output_dim: usize,
    ) -> Self {
        ArchitectureSpec {
            kind,
            input_dim,
            hidden_widths: vec![width; n_layers],
            output_dim,
            power: 2,
            activation: Activation::Tanh,
            residuals: true,
        }
    }

    pub fn with_power(mut self, power: u32) -> Self {
        self.power = power;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn without_residuals(mut self) -> Self {
        self.residuals = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() {
            return Err(Error::contract("at least one hidden layer is required"));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::contract("all layer widths must be >= 1"));
        }
        if self.kind == ArchitectureKind::SqrSkipResNet && self.power == 0 {
            return Err(Error::contract("power must be an integer >= 1"));
        }
        Ok(())
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Number of affine layers, hidden plus output.
    pub fn n_layers(&self) -> usize {
        self.hidden_widths.len() + 1
    }

    /// Widths `h(0) = d, h(1), ..., h(L), h(L+1) = D`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_widths.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_widths);
        w.push(self.output_dim);
        w
    }

    /// (rows, cols) of the weight matrix of affine layer `layer` (0-based).
    pub fn weight_shape(&self, layer: usize) -> (usize, usize) {
        let w = self.widths();
        (w[layer + 1], w[layer])
    }

    pub fn parameter_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[1] * p[0] + p[1]).sum()
    }

    /// Effective skip power of the architecture (1 for ResNet/SkipResNet).
    pub fn skip_power(&self) -> u32 {
        match self.kind {
            ArchitectureKind::SqrSkipResNet => self.power,
            _ => 1,
        }
    }

    /// Combination rule of hidden layer `l`, counted from 1.
    pub fn layer_skip(&self, l: usize) -> LayerSkip {
        assert!(l >= 1 && l <= self.n_hidden(), "hidden layer index {l} out of range");
        let wanted = self.residuals
            && match self.kind {
                ArchitectureKind::Plain => false,
                ArchitectureKind::ResNet => true,
                ArchitectureKind::SkipResNet | ArchitectureKind::SqrSkipResNet => l % 2 == 1,
            };
        if !wanted {
            return LayerSkip::None;
        }
        let w = self.widths();
        if w[l] != w[l - 1] {
            LayerSkip::WidthMismatch
        } else {
            LayerSkip::Power(self.skip_power())
        }
    }

    /// Combination rule of every hidden layer, in order.
    pub fn skip_plan(&self) -> Vec<LayerSkip> {
        (1..=self.n_hidden()).map(|l| self.layer_skip(l)).collect()
    }
}
