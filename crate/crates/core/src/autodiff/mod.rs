//! Differentiation machinery.
//!
//! Input derivatives of a network (`N`, `N_x`, `N_t`, `N_xx`) come from
//! second-order forward jets. Parameter gradients come from a reverse-mode
//! tape over batched primitives; running jet arithmetic on the tape gives
//! parameter gradients of losses built from input derivatives.

mod fd;
mod jet;
mod tape;

pub use fd::{central_gradient, finite_difference_check, FdReport};
pub use jet::{jet_forward, Jet2, JetOutput};
pub use tape::{grad_wrt_params, NodeId, Tape, TapeGradient};
