use crate::error::Result;
use crate::network::ParameterSet;
use crate::optim::{OptimReport, Optimizer};

use super::problem::{pinn_loss_raw, pinn_objective, BurgersInverseProblem, LambdaPair};

/// `λ` after an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSample {
    pub iter: usize,
    pub lambda: LambdaPair,
    pub loss: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct InverseOutcome {
    pub lambda: LambdaPair,
    pub params: ParameterSet,
    pub report: OptimReport,
    pub trajectory: Vec<LambdaSample>,
    pub mse_u: f64,
    pub mse_g: f64,
    /// Percentage errors against `truth`, when supplied.
    pub percent_errors: Option<(f64, f64)>,
}

/// Minimizes the PINN loss jointly over the network parameters and `λ`,
/// starting from `params0` and `problem.lambda_init`. Optimizer breakdowns
/// are reported in `report.stop`, not as errors.
pub fn solve_inverse(
    problem: &BurgersInverseProblem,
    params0: &ParameterSet,
    optimizer: &Optimizer,
    truth: Option<LambdaPair>,
) -> Result<InverseOutcome> {
    let theta0 = problem.initial_theta(params0)?;
    let p = problem.n_params();
    let mut trajectory = vec![LambdaSample {
        iter: 0,
        lambda: problem.lambda_init,
        loss: f64::NAN,
        elapsed_s: 0.0,
    }];
    let mut objective = pinn_objective(problem);
    let (theta, report) = optimizer.minimize(&mut objective, &theta0, |it| {
        trajectory.push(LambdaSample {
            iter: it.iter,
            lambda: LambdaPair::new(it.theta[p], it.theta[p + 1]),
            loss: it.loss,
            elapsed_s: it.elapsed.as_secs_f64(),
        });
    })?;
    let (params, lambda) = problem.split_theta(&theta)?;
    let last = pinn_loss_raw(problem, &theta)?;
    Ok(InverseOutcome {
        lambda,
        params,
        percent_errors: truth.map(|t| lambda.percent_errors(&t)),
        report,
        trajectory,
        mse_u: last.mse_u,
        mse_g: last.mse_g,
    })
}
