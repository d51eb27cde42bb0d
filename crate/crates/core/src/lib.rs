//! Plain, residual and power-enhanced skip-residual networks for scattered
//! data interpolation and physics-informed inverse problems.
//!
//! - [`linalg`], [`rng`]: dense arithmetic and seeded randomness
//! - [`network`]: architectures, forward evaluation, back-propagation
//! - [`autodiff`]: second-order input jets, a reverse-mode tape, finite-difference checks
//! - [`optim`]: full-batch Adam and L-BFGS with a strong Wolfe line search
//! - [`metrics`]: error measures and the supervised training objective
//! - [`pinn`]: the inverse viscous Burgers problem and its reference solution
//! - [`data`]: test functions, samplers, loaders and normalization
//! - [`diagnostics`]: weight-norm histories and gradient histograms
//! - [`train`]: interpolation runs with validation and diagnostics

pub mod autodiff;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod pinn;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use network::{ArchitectureKind, ArchitectureSpec, ParameterSet};
pub use rng::RngStream;
