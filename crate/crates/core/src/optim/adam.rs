use std::time::Instant;

use crate::error::{Error, Result};

use super::{all_finite, Iteration, Objective, OptimReport, StopReason};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub lr: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        AdamSettings {
            lr: 1e-3,
            iterations: 10_000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam on the full objective. `history[k]` is the loss at
/// the iterate the k-th update started from.
pub fn adam_minimize<O, F>(
    objective: &mut O,
    theta0: &[f64],
    settings: &AdamSettings,
    mut observer: F,
) -> Result<(Vec<f64>, OptimReport)>
where
    O: Objective + ?Sized,
    F: FnMut(&Iteration<'_>),
{
    if !(settings.lr > 0.0) {
        return Err(Error::contract("Adam learning rate must be positive"));
    }
    let start = Instant::now();
    let mut theta = theta0.to_vec();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut report = OptimReport::new();
    let (b1, b2) = (settings.beta1, settings.beta2);
    let mut b1t = 1.0;
    let mut b2t = 1.0;

    for t in 1..=settings.iterations {
        let (loss, grad) = objective.evaluate(&theta)?;
        report.evaluations += 1;
        if !loss.is_finite() || !all_finite(&grad) {
            report.stop = StopReason::NonFinite;
            report.message = Some(format!("non-finite loss or gradient at iteration {t}"));
            report.final_loss = loss;
            break;
        }
        b1t *= b1;
        b2t *= b2;
        for i in 0..theta.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / (1.0 - b1t);
            let v_hat = v[i] / (1.0 - b2t);
            theta[i] -= settings.lr * m_hat / (v_hat.sqrt() + settings.eps);
        }
        debug_assert!(all_finite(&theta));
        report.history.push(loss);
        report.iterations = t;
        observer(&Iteration {
            iter: t,
            theta: &theta,
            loss,
            grad: &grad,
            elapsed: start.elapsed(),
        });
    }
    if report.stop != StopReason::NonFinite {
        report.stop = StopReason::MaxIter;
    }
    report.wall_time = start.elapsed();
    Ok((theta, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::no_observer;
    use crate::rng::RngStream;

    fn settings(lr: f64, iterations: usize) -> AdamSettings {
        AdamSettings {
            lr,
            iterations,
            ..Default::default()
        }
    }

    #[test]
    fn scalar_quadratic() {
        let mut f = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let (x, r) = adam_minimize(&mut f, &[1.0], &settings(0.1, 500), no_observer).unwrap();
        assert!(x[0].abs() < 1e-3, "{}", x[0]);
        assert_eq!(r.history.len(), 500);
        assert_eq!(r.stop, StopReason::MaxIter);
    }

    #[test]
    fn stationary_start_does_not_move() {
        let mut f = |_: &[f64]| Ok((1.0, vec![0.0, 0.0]));
        let (x, _) = adam_minimize(&mut f, &[0.3, -4.0], &settings(0.1, 50), no_observer).unwrap();
        assert_eq!(x, vec![0.3, -4.0]);
    }

    #[test]
    fn shifted_quadratic_converges() {
        let mut rng = RngStream::new(12);
        let c: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut f = |x: &[f64]| {
            let loss = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
            let grad = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
            Ok((loss, grad))
        };
        let (x, _) = adam_minimize(&mut f, &[0.0; 5], &settings(0.01, 2000), no_observer).unwrap();
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn non_finite_aborts_with_report() {
        let mut f = |x: &[f64]| Ok((if x[0] < 0.5 { f64::NAN } else { x[0] }, vec![1.0]));
        let (_, r) = adam_minimize(&mut f, &[1.0], &settings(0.3, 100), no_observer).unwrap();
        assert_eq!(r.stop, StopReason::NonFinite);
        assert!(r.iterations < 100);
        assert_eq!(r.history.len(), r.iterations);
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let mut f = |_: &[f64]| Ok((0.0, vec![0.0]));
        assert!(adam_minimize(&mut f, &[0.0], &settings(0.0, 1), no_observer).is_err());
    }
}
