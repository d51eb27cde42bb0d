//! Full-batch training drivers.
//!
//! Both optimizers minimize an [`Objective`]: a closure returning the loss
//! and its gradient at a flat parameter vector. Each completed iteration is
//! reported to an observer, which may record diagnostics but cannot alter
//! the iterates.

use std::fmt;
use std::time::Duration;

use crate::error::Result;

mod adam;
mod lbfgs;
mod line_search;

pub use adam::{adam_minimize, AdamSettings};
pub use lbfgs::{lbfgs_minimize, ConvergenceCriteria, LbfgsSettings};
pub use line_search::{strong_wolfe, LineSearchOutcome, WolfeParams};

/// Either driver with its settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam(AdamSettings),
    Lbfgs(LbfgsSettings),
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Adam(_) => "adam",
            Optimizer::Lbfgs(_) => "lbfgs",
        }
    }

    pub fn minimize<O, F>(&self, objective: &mut O, theta0: &[f64], observer: F) -> Result<(Vec<f64>, OptimReport)>
    where
        O: Objective + ?Sized,
        F: FnMut(&Iteration<'_>),
    {
        match self {
            Optimizer::Adam(s) => adam_minimize(objective, theta0, s, observer),
            Optimizer::Lbfgs(s) => lbfgs_minimize(objective, theta0, s, observer),
        }
    }
}

/// Loss and gradient at a point.
pub trait Objective {
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self(theta)
    }
}

/// State handed to observers after each iteration.
#[derive(Debug)]
pub struct Iteration<'a> {
    /// 1-based iteration count.
    pub iter: usize,
    pub theta: &'a [f64],
    pub loss: f64,
    pub grad: &'a [f64],
    pub elapsed: Duration,
}

/// Observer that ignores everything.
pub fn no_observer(_: &Iteration<'_>) {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradTol,
    FChangeTol,
    MaxIter,
    LineSearchFailure,
    /// The objective produced a non-finite loss or gradient.
    NonFinite,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::GradTol => "grad_tol",
            StopReason::FChangeTol => "f_change_tol",
            StopReason::MaxIter => "max_iter",
            StopReason::LineSearchFailure => "line_search_failure",
            StopReason::NonFinite => "non_finite",
        }
    }

    /// Whether the run ended because training broke down.
    pub fn is_failure(self) -> bool {
        matches!(self, StopReason::NonFinite)
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Line-search record of one accepted L-BFGS step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub alpha: f64,
    /// φ(0) and φ'(0) along the search direction.
    pub f0: f64,
    pub slope0: f64,
    /// φ(α) and φ'(α) at the accepted step.
    pub f: f64,
    pub slope: f64,
}

impl StepRecord {
    /// Strong Wolfe conditions with the given constants.
    pub fn satisfies_strong_wolfe(&self, c1: f64, c2: f64) -> bool {
        self.f <= self.f0 + c1 * self.alpha * self.slope0 && self.slope.abs() <= -c2 * self.slope0
    }
}

#[derive(Debug, Clone)]
pub struct OptimReport {
    pub iterations: usize,
    pub stop: StopReason,
    /// One loss value per iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub wall_time: Duration,
    /// Loss at the returned parameters, when it was evaluated there.
    pub final_loss: f64,
    /// L-BFGS only: one entry per accepted step.
    pub steps: Vec<StepRecord>,
    pub message: Option<String>,
}

impl OptimReport {
    fn new() -> Self {
        OptimReport {
            iterations: 0,
            stop: StopReason::MaxIter,
            history: Vec::new(),
            evaluations: 0,
            wall_time: Duration::ZERO,
            final_loss: f64::NAN,
            steps: Vec::new(),
            message: None,
        }
    }
}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
