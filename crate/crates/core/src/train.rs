//! Supervised interpolation runs: normalization, training, validation and
//! diagnostics in one call. Reported errors are always in raw target units.

use crate::data::{Dataset, Normalization, NormalizationScheme};
use crate::diagnostics::{DiagnosticsConfig, LossRecord, Recorder};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{interpolation_objective, rel_l2, EvalResult};
use crate::network::{predict, ArchitectureSpec, ParameterSet};
use crate::optim::{OptimReport, Optimizer};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    /// Applied in order to the training set; validation reuses the fitted maps.
    pub normalization: Vec<NormalizationScheme>,
    /// Validation error is logged every this many iterations and at the last one.
    /// Zero disables it.
    pub validate_every: usize,
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub normalization: Normalization,
    pub report: OptimReport,
    pub loss_history: Vec<LossRecord>,
    /// `None` when the final network or its errors are not finite.
    pub train: Option<EvalResult>,
    pub validation: Option<EvalResult>,
    pub diagnostics: Option<Recorder>,
    pub failed: bool,
}

/// Network output in raw units for raw inputs.
pub fn predict_raw(spec: &ArchitectureSpec, params: &ParameterSet, norm: &Normalization, x: &Matrix) -> Result<Vec<f64>> {
    let out = predict(spec, params, &norm.apply_inputs(x)?)?;
    Ok(norm.invert_targets(out.as_slice()))
}

/// Trains `params0` on `train` (raw units) and evaluates on both sets.
pub fn train_interpolation(
    spec: &ArchitectureSpec,
    params0: &ParameterSet,
    train: &Dataset,
    validation: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    params0.check_shapes(spec)?;
    let (x_raw, y_raw) = train.raw()?;
    let raw_train = Dataset::new(x_raw.clone(), y_raw.clone())?;
    let normed = raw_train.normalize_all(&config.normalization)?;
    let norm = normed.normalization.clone();
    let val_raw = validation.map(|v| v.raw()).transpose()?;
    if let Some((xv, _)) = &val_raw {
        if xv.cols() != spec.input_dim {
            return Err(Error::contract("validation set has the wrong input dimension"));
        }
    }
    let val_inputs = val_raw.as_ref().map(|(xv, _)| norm.apply_inputs(xv)).transpose()?;
    let target_scale2 = norm.target.scale * norm.target.scale;

    let mut recorder = if config.diagnostics.norms || config.diagnostics.histograms {
        let mut r = Recorder::new(spec, config.diagnostics.clone())?;
        r.record_initial(params0)?;
        Some(r)
    } else {
        None
    };
    let mut history = Vec::new();
    let mut objective = interpolation_objective(spec, &normed)?;
    let max_iter = match &config.optimizer {
        Optimizer::Adam(s) => s.iterations,
        Optimizer::Lbfgs(s) => s.criteria.max_iter,
    };
    let theta0 = params0.flatten().into_inner();
    let (theta, report) = config.optimizer.minimize(&mut objective, &theta0, |it| {
        if let Some(r) = recorder.as_mut() {
            r.observe(it);
        }
        let due = config.validate_every > 0 && (it.iter % config.validate_every == 0 || it.iter == max_iter);
        let val_rel_l2 = match (&val_inputs, &val_raw) {
            (Some(xv), Some((_, yv))) if due => ParameterSet::unflatten(it.theta, spec)
                .and_then(|p| predict(spec, &p, xv))
                .ok()
                .and_then(|out| rel_l2(&norm.invert_targets(out.as_slice()), yv).ok()),
            _ => None,
        };
        history.push(LossRecord {
            iter: it.iter,
            train_mse: it.loss * target_scale2,
            val_rel_l2,
            elapsed_s: it.elapsed.as_secs_f64(),
        });
    })?;
    let params = ParameterSet::unflatten(&theta, spec)?;
    let finite = params.is_finite();
    let eval = |x: &Matrix, y: &[f64]| -> Result<Option<EvalResult>> {
        if !finite {
            return Ok(None);
        }
        let pred = predict_raw(spec, &params, &norm, x)?;
        let e = EvalResult::compute(&pred, y)?;
        Ok((e.mse.is_finite() && e.max_abs.is_finite()).then_some(e))
    };
    let train_eval = eval(&x_raw, &y_raw)?;
    let val_eval = match &val_raw {
        Some((xv, yv)) => eval(xv, yv)?,
        None => None,
    };
    let failed = report.stop.is_failure() || train_eval.is_none();
    Ok(TrainOutcome {
        params,
        normalization: norm,
        report,
        loss_history: history,
        train: train_eval,
        validation: val_eval,
        diagnostics: recorder,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{grid, sample_uniform, Domain, TestFunction};
    use crate::network::ArchitectureKind;
    use crate::optim::{AdamSettings, ConvergenceCriteria, LbfgsSettings};
    use crate::rng::RngStream;

    fn setup(n: usize) -> (ArchitectureSpec, ParameterSet, Dataset, Dataset) {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 10, 1);
        let mut rng = RngStream::new(3);
        let x = sample_uniform(&Domain::unit(2), n, &mut rng).unwrap();
        let train = Dataset::from_function(TestFunction::F1, x).unwrap();
        let val = Dataset::from_function(TestFunction::F1, grid(&Domain::unit(2), &[12, 12]).unwrap()).unwrap();
        let params = ParameterSet::glorot(&spec, &mut rng).unwrap();
        (spec, params, train, val)
    }

    fn lbfgs(max_iter: usize) -> Optimizer {
        Optimizer::Lbfgs(LbfgsSettings {
            criteria: ConvergenceCriteria { max_iter, ..Default::default() },
            ..Default::default()
        })
    }

    #[test]
    fn training_reduces_error_in_raw_units() {
        let (spec, params, train, val) = setup(80);
        let config = TrainConfig {
            optimizer: lbfgs(200),
            normalization: vec![NormalizationScheme::InputUnitBox, NormalizationScheme::TargetZscore],
            validate_every: 10,
            diagnostics: DiagnosticsConfig::standard(&spec, 200),
        };
        let before = EvalResult::compute(
            &predict_raw(&spec, &params, &Normalization::identity(2), &val.inputs).unwrap(),
            &val.targets,
        )
        .unwrap();
        let out = train_interpolation(&spec, &params, &train, Some(&val), &config).unwrap();
        assert!(!out.failed);
        let v = out.validation.unwrap();
        assert!(v.max_abs < before.max_abs, "{v:?} vs {before:?}");
        assert!(out.train.unwrap().mse < 1e-3);
        // The logged raw-unit MSE at the last iteration matches the final train MSE.
        let last = out.loss_history.last().unwrap();
        assert!((last.train_mse - out.train.unwrap().mse).abs() <= 1e-10 * out.train.unwrap().mse.max(1e-12));
        assert!(out.loss_history.iter().filter(|r| r.val_rel_l2.is_some()).count() >= 1);
        let diag = out.diagnostics.unwrap();
        assert_eq!(diag.norms.len(), out.report.iterations + 1);
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let (spec, params, train, val) = setup(40);
        let config = TrainConfig {
            optimizer: Optimizer::Adam(AdamSettings { iterations: 30, ..Default::default() }),
            normalization: vec![NormalizationScheme::TargetZscore],
            validate_every: 5,
            diagnostics: DiagnosticsConfig::disabled(),
        };
        let a = train_interpolation(&spec, &params, &train, Some(&val), &config).unwrap();
        let b = train_interpolation(&spec, &params, &train, Some(&val), &config).unwrap();
        let untimed = |h: &[LossRecord]| h.iter().map(|r| LossRecord { elapsed_s: 0.0, ..*r }).collect::<Vec<_>>();
        assert_eq!(untimed(&a.loss_history), untimed(&b.loss_history));
        assert_eq!(a.params, b.params);
        assert!(a.diagnostics.is_none());
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let (spec, params, train, _) = setup(20);
        let config = TrainConfig {
            optimizer: Optimizer::Adam(AdamSettings { lr: 1e300, iterations: 20, ..Default::default() }),
            normalization: vec![],
            validate_every: 0,
            diagnostics: DiagnosticsConfig::disabled(),
        };
        let out = train_interpolation(&spec, &params, &train, None, &config).unwrap();
        assert!(out.failed, "{:?}", out.report.stop);
    }
}
