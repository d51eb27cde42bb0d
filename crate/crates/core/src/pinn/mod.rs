//! The inverse viscous Burgers problem: recover `(λ1, λ2)` in
//! `u_t + λ1 u u_x − λ2 u_xx = 0` from scattered observations, with the PDE
//! residual of the network penalised at collocation points.

mod problem;
mod reference;
mod solve;

pub use problem::{
    collocation_residuals, pinn_loss, pinn_objective, record_jets, residual_g, BurgersInverseProblem, JetNodes,
    LambdaPair, PinnLoss,
};
pub use reference::{cole_hopf_reference, ColeHopf, HermiteRule, ReferenceGrid, BENCHMARK_NU, MAX_HERMITE_NODES};
pub use solve::{solve_inverse, InverseOutcome, LambdaSample};
