//! Strong Wolfe line search: bracketing followed by a zoom phase with
//! safeguarded cubic interpolation.

use crate::error::Result;

use super::{all_finite, dot, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_evals: usize,
    pub alpha_max: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        WolfeParams {
            c1: 1e-4,
            c2: 0.9,
            max_evals: 40,
            alpha_max: 1e10,
        }
    }
}

#[derive(Debug, Clone)]
pub enum LineSearchOutcome {
    Accepted {
        alpha: f64,
        theta: Vec<f64>,
        f: f64,
        grad: Vec<f64>,
        slope: f64,
        evaluations: usize,
    },
    Failed {
        evaluations: usize,
        reason: String,
    },
}

#[derive(Clone)]
struct Sample {
    alpha: f64,
    f: f64,
    slope: f64,
    theta: Vec<f64>,
    grad: Vec<f64>,
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, or
/// `None` when the cubic has no real minimizer.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b - (b - a) * (db + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Searches along `direction` from `theta` for a step satisfying the strong
/// Wolfe conditions. `f0`, `slope0` are the value and directional
/// derivative at `alpha = 0`; `slope0` must be negative.
pub fn strong_wolfe<O: Objective + ?Sized>(
    objective: &mut O,
    theta: &[f64],
    direction: &[f64],
    f0: f64,
    slope0: f64,
    alpha_init: f64,
    params: &WolfeParams,
) -> Result<LineSearchOutcome> {
    let mut evaluations = 0;
    let mut eval = |alpha: f64, evaluations: &mut usize| -> Result<Sample> {
        let x: Vec<f64> = theta.iter().zip(direction).map(|(t, d)| t + alpha * d).collect();
        let (f, grad) = objective.evaluate(&x)?;
        *evaluations += 1;
        let slope = dot(&grad, direction);
        Ok(Sample {
            alpha,
            f,
            slope,
            theta: x,
            grad,
        })
    };
    let accept = |s: Sample, evaluations: usize| LineSearchOutcome::Accepted {
        alpha: s.alpha,
        theta: s.theta,
        f: s.f,
        grad: s.grad,
        slope: s.slope,
        evaluations,
    };
    let sufficient = |s: &Sample| s.f <= f0 + params.c1 * s.alpha * slope0;
    let curvature = |s: &Sample| s.slope.abs() <= -params.c2 * slope0;
    let finite = |s: &Sample| s.f.is_finite() && s.slope.is_finite() && all_finite(&s.grad);

    if !(slope0 < 0.0) {
        return Ok(LineSearchOutcome::Failed {
            evaluations,
            reason: "search direction is not a descent direction".into(),
        });
    }

    let mut prev = Sample {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        theta: theta.to_vec(),
        grad: Vec::new(),
    };
    let mut alpha = alpha_init.min(params.alpha_max);
    let mut bracket: Option<(Sample, Sample)> = None;

    // Bracketing phase.
    let mut first = true;
    while evaluations < params.max_evals {
        let cur = eval(alpha, &mut evaluations)?;
        if !finite(&cur) {
            // Overshot into a region where the objective blows up.
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !sufficient(&cur) || (!first && cur.f >= prev.f) {
            bracket = Some((prev, cur));
            break;
        }
        if curvature(&cur) {
            return Ok(accept(cur, evaluations));
        }
        if cur.slope >= 0.0 {
            bracket = Some((cur, prev));
            break;
        }
        let lo = cur.alpha + 1.1 * (cur.alpha - prev.alpha);
        let hi = (4.0 * cur.alpha).max(lo);
        let next = cubic_min(prev.alpha, prev.f, prev.slope, cur.alpha, cur.f, cur.slope)
            .filter(|t| *t > cur.alpha)
            .unwrap_or(hi)
            .clamp(lo, hi)
            .min(params.alpha_max);
        if next <= cur.alpha {
            break;
        }
        prev = cur;
        alpha = next;
        first = false;
    }

    let Some((mut lo, mut hi)) = bracket else {
        return Ok(LineSearchOutcome::Failed {
            evaluations,
            reason: "no bracketing step found".into(),
        });
    };

    // Zoom phase: `lo` always satisfies sufficient decrease and has the
    // lowest value seen; the minimizer lies between `lo` and `hi`.
    while evaluations < params.max_evals {
        let width = hi.alpha - lo.alpha;
        if width.abs() <= f64::EPSILON * lo.alpha.abs().max(1e-300) {
            break;
        }
        let guard = 0.1 * width.abs();
        let (left, right) = if lo.alpha < hi.alpha {
            (lo.alpha + guard, hi.alpha - guard)
        } else {
            (hi.alpha + guard, lo.alpha - guard)
        };
        let trial = if hi.f.is_finite() {
            cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope)
        } else {
            None
        }
        .filter(|t| *t >= left && *t <= right)
        .unwrap_or(0.5 * (lo.alpha + hi.alpha));
        let cur = eval(trial, &mut evaluations)?;
        if !finite(&cur) || !sufficient(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(accept(cur, evaluations));
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Ok(LineSearchOutcome::Failed {
        evaluations,
        reason: "zoom did not find a strong Wolfe point".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact_for_quadratics() {
        // φ(α) = (α - 2)^2
        let f = |a: f64| (a - 2.0) * (a - 2.0);
        let d = |a: f64| 2.0 * (a - 2.0);
        let t = cubic_min(0.0, f(0.0), d(0.0), 5.0, f(5.0), d(5.0)).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn accepted_step_satisfies_wolfe() {
        let mut obj = |x: &[f64]| {
            let f = x[0].powi(4) - 3.0 * x[0];
            Ok((f, vec![4.0 * x[0].powi(3) - 3.0]))
        };
        let (f0, g0) = obj(&[0.0]).unwrap();
        let dir = [-g0[0]];
        let slope0 = g0[0] * dir[0];
        let p = WolfeParams::default();
        match strong_wolfe(&mut obj, &[0.0], &dir, f0, slope0, 10.0, &p).unwrap() {
            LineSearchOutcome::Accepted { f, slope, alpha, .. } => {
                assert!(f <= f0 + p.c1 * alpha * slope0);
                assert!(slope.abs() <= -p.c2 * slope0);
            }
            LineSearchOutcome::Failed { reason, .. } => panic!("{reason}"),
        }
    }

    #[test]
    fn ascent_direction_fails_cleanly() {
        let mut obj = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let out = strong_wolfe(&mut obj, &[1.0], &[1.0], 1.0, 2.0, 1.0, &WolfeParams::default()).unwrap();
        assert!(matches!(out, LineSearchOutcome::Failed { .. }));
    }
}
