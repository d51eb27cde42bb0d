use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};

use super::line_search::{strong_wolfe, LineSearchOutcome, WolfeParams};
use super::{all_finite, dot, norm_inf, Iteration, Objective, OptimReport, StepRecord, StopReason};

/// Stopping rules shared by the quasi-Newton driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCriteria {
    /// Stop when `‖g‖∞ ≤ grad_tol`.
    pub grad_tol: f64,
    /// Stop when `|f(k) − f(k−1)| ≤ f_change_tol · max(1, |f(k)|)`.
    pub f_change_tol: f64,
    pub max_iter: usize,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        ConvergenceCriteria {
            grad_tol: 1e-9,
            f_change_tol: 1e-9,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub criteria: ConvergenceCriteria,
    pub history_size: usize,
    pub wolfe: WolfeParams,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            criteria: ConvergenceCriteria::default(),
            history_size: 10,
            wolfe: WolfeParams::default(),
        }
    }
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `-H g` by the two-loop recursion, with `H0 = γ I`, `γ = sᵀy / yᵀy` of the newest pair.
fn two_loop(grad: &[f64], memory: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = vec![0.0; memory.len()];
    for (i, p) in memory.iter().enumerate().rev() {
        let a = p.rho * dot(&p.s, &q);
        alphas[i] = a;
        for (qj, yj) in q.iter_mut().zip(&p.y) {
            *qj -= a * yj;
        }
    }
    if let Some(newest) = memory.back() {
        let gamma = dot(&newest.s, &newest.y) / dot(&newest.y, &newest.y);
        for v in &mut q {
            *v *= gamma;
        }
    }
    for (i, p) in memory.iter().enumerate() {
        let b = p.rho * dot(&p.y, &q);
        for (qj, sj) in q.iter_mut().zip(&p.s) {
            *qj += (alphas[i] - b) * sj;
        }
    }
    for v in &mut q {
        *v = -*v;
    }
    q
}

/// Limited-memory BFGS with a strong Wolfe line search.
///
/// `history[k]` is the loss after the (k+1)-th accepted step. A line-search
/// failure first retries along steepest descent with the memory cleared;
/// a second consecutive failure ends the run with
/// [`StopReason::LineSearchFailure`] at the best point found.
pub fn lbfgs_minimize<O, F>(
    objective: &mut O,
    theta0: &[f64],
    settings: &LbfgsSettings,
    mut observer: F,
) -> Result<(Vec<f64>, OptimReport)>
where
    O: Objective + ?Sized,
    F: FnMut(&Iteration<'_>),
{
    if settings.history_size == 0 {
        return Err(Error::contract("L-BFGS history size must be >= 1"));
    }
    let crit = settings.criteria;
    if !(crit.grad_tol > 0.0 && crit.f_change_tol > 0.0) {
        return Err(Error::contract("convergence tolerances must be positive"));
    }
    let start = Instant::now();
    let mut report = OptimReport::new();
    let mut theta = theta0.to_vec();
    let (mut f, mut grad) = objective.evaluate(&theta)?;
    report.evaluations = 1;
    report.final_loss = f;
    if !f.is_finite() || !all_finite(&grad) {
        report.stop = StopReason::NonFinite;
        report.message = Some("non-finite loss or gradient at the starting point".into());
        report.wall_time = start.elapsed();
        return Ok((theta, report));
    }
    if norm_inf(&grad) <= crit.grad_tol {
        report.stop = StopReason::GradTol;
        report.wall_time = start.elapsed();
        return Ok((theta, report));
    }

    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(settings.history_size);
    let mut retried = false;
    report.stop = StopReason::MaxIter;

    while report.iterations < crit.max_iter {
        let mut direction = two_loop(&grad, &memory);
        let mut slope0 = dot(&grad, &direction);
        if !(slope0 < 0.0) {
            memory.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope0 = dot(&grad, &direction);
        }
        let alpha_init = if memory.is_empty() {
            (1.0 / norm_inf(&grad)).min(1.0)
        } else {
            1.0
        };
        let outcome = strong_wolfe(objective, &theta, &direction, f, slope0, alpha_init, &settings.wolfe)?;
        let (alpha, new_theta, new_f, new_grad, slope) = match outcome {
            LineSearchOutcome::Accepted {
                alpha,
                theta,
                f,
                grad,
                slope,
                evaluations,
            } => {
                report.evaluations += evaluations;
                (alpha, theta, f, grad, slope)
            }
            LineSearchOutcome::Failed { evaluations, reason } => {
                report.evaluations += evaluations;
                if !retried && !memory.is_empty() {
                    retried = true;
                    memory.clear();
                    continue;
                }
                report.stop = StopReason::LineSearchFailure;
                report.message = Some(reason);
                break;
            }
        };
        retried = false;

        let s: Vec<f64> = direction.iter().map(|d| alpha * d).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y) && sy > 0.0 {
            if memory.len() == settings.history_size {
                memory.pop_front();
            }
            memory.push_back(Pair { s, y, rho: 1.0 / sy });
        }

        report.steps.push(StepRecord {
            alpha,
            f0: f,
            slope0,
            f: new_f,
            slope,
        });
        let f_prev = f;
        theta = new_theta;
        f = new_f;
        grad = new_grad;
        report.iterations += 1;
        report.history.push(f);
        report.final_loss = f;
        observer(&Iteration {
            iter: report.iterations,
            theta: &theta,
            loss: f,
            grad: &grad,
            elapsed: start.elapsed(),
        });

        if norm_inf(&grad) <= crit.grad_tol {
            report.stop = StopReason::GradTol;
            break;
        }
        if (f_prev - f).abs() <= crit.f_change_tol * f.abs().max(1.0) {
            report.stop = StopReason::FChangeTol;
            break;
        }
    }
    report.wall_time = start.elapsed();
    Ok((theta, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::no_observer;
    use crate::rng::RngStream;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Ok((f, g))
    }

    fn tight(max_iter: usize) -> LbfgsSettings {
        LbfgsSettings {
            criteria: ConvergenceCriteria {
                grad_tol: 1e-9,
                f_change_tol: 1e-300,
                max_iter,
            },
            ..Default::default()
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let mut obj = rosenbrock;
        let (x, r) = lbfgs_minimize(&mut obj, &[-1.2, 1.0], &tight(200), no_observer).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?} {r:?}");
        assert!(r.iterations < 200);
        let p = WolfeParams::default();
        assert!(r.steps.iter().all(|s| s.satisfies_strong_wolfe(p.c1, p.c2)));
    }

    #[test]
    fn starting_at_minimum_takes_no_steps() {
        let mut obj = rosenbrock;
        let (x, r) = lbfgs_minimize(&mut obj, &[1.0, 1.0], &LbfgsSettings::default(), no_observer).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.stop, StopReason::GradTol);
        assert!(r.history.is_empty());
    }

    #[test]
    fn isotropic_quadratic_stops_quickly() {
        let mut rng = RngStream::new(3);
        let x0: Vec<f64> = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let mut obj = |x: &[f64]| Ok((dot(x, x), x.iter().map(|v| 2.0 * v).collect()));
        let (_, r) = lbfgs_minimize(&mut obj, &x0, &tight(50), no_observer).unwrap();
        assert_eq!(r.stop, StopReason::GradTol);
        assert!(r.iterations <= 3, "{}", r.iterations);
    }

    /// `½ xᵀAx − bᵀx` with `A = QᵀQ + I`, `Q` random 10×10.
    pub(crate) fn random_pd_quadratic(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = 10;
        let mut rng = RngStream::new(seed);
        let q: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| q[k][i] * q[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let b = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        (a, b)
    }

    #[test]
    fn pd_quadratic_terminates_within_n_plus_two() {
        for seed in 0..5 {
            let (a, b) = random_pd_quadratic(seed);
            let mut obj = |x: &[f64]| {
                let ax: Vec<f64> = a.iter().map(|row| dot(row, x)).collect();
                let f = 0.5 * dot(x, &ax) - dot(&b, x);
                Ok((f, ax.iter().zip(&b).map(|(u, v)| u - v).collect()))
            };
            // Finite termination needs (near-)exact line searches.
            let mut st = tight(100);
            st.wolfe.c2 = 0.01;
            let (_, r) = lbfgs_minimize(&mut obj, &[0.0; 10], &st, no_observer).unwrap();
            assert_eq!(r.stop, StopReason::GradTol, "seed {seed}: {r:?}");
            assert!(r.iterations <= 12, "seed {seed}: {} iterations", r.iterations);
        }
    }

    #[test]
    fn history_matches_iterations_and_is_deterministic() {
        let run = || {
            let mut obj = rosenbrock;
            lbfgs_minimize(&mut obj, &[-1.2, 1.0], &LbfgsSettings::default(), no_observer).unwrap()
        };
        let (x1, r1) = run();
        let (x2, r2) = run();
        assert_eq!(r1.history.len(), r1.iterations);
        assert_eq!(x1, x2);
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r1.history), bits(&r2.history));
    }

    #[test]
    fn nan_objective_is_reported_not_panicked() {
        let mut obj = |x: &[f64]| Ok((if x[0] > 0.0 { f64::NAN } else { x[0] * x[0] }, vec![2.0 * x[0]]));
        let (_, r) = lbfgs_minimize(&mut obj, &[1.0], &LbfgsSettings::default(), no_observer).unwrap();
        assert_eq!(r.stop, StopReason::NonFinite);
    }

    #[test]
    fn zero_history_rejected() {
        let mut obj = rosenbrock;
        let s = LbfgsSettings {
            history_size: 0,
            ..Default::default()
        };
        assert!(lbfgs_minimize(&mut obj, &[0.0, 0.0], &s, no_observer).is_err());
    }
}
