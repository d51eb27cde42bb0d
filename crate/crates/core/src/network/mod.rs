//! The four architectures: plain, residual, skip-residual and the
//! power-enhanced skip-residual network.
//!
//! Hidden layers apply `f(x) = σ(W x + b)` and then, depending on the
//! architecture, add either the previous output or its element-wise power.
//! The output layer is affine only. When the architecture asks for an
//! addition between layers of different widths (typically the input layer,
//! `d = 2` against 50 neurons), the addition is omitted and the layer behaves
//! as a plain one; [`ArchitectureSpec::skip_plan`] reports where that happens.

mod checkpoint;
mod forward;
mod params;
mod spec;
mod unroll;

pub use checkpoint::Checkpoint;
pub use forward::{backward, backward_batch, forward, forward_batch, predict, ForwardCache, Gradients};
pub(crate) use forward::affine;
pub use params::{FlatLayout, Layer, ParameterSet};
pub use spec::{Activation, ArchitectureKind, ArchitectureSpec, LayerSkip};
pub use unroll::unroll3;
