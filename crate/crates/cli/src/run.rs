use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use powernet::data::{
    grid, load_elevation_grid, load_point_cloud, sample_uniform, write_atomic, Dataset, Domain, TestFunction,
};
use powernet::diagnostics::{
    default_snapshot_epochs, loss_history_to_csv, save_histograms, DiagnosticsConfig, LossRecord,
};
use powernet::linalg::Matrix;
use powernet::metrics::EvalResult;
use powernet::network::{predict, ParameterSet};
use powernet::pinn::{solve_inverse, BurgersInverseProblem, LambdaPair, ReferenceGrid};
use powernet::train::{predict_raw, train_interpolation, TrainConfig};
use powernet::RngStream;

use crate::config::{DataSource, ExperimentConfig, Task};
use crate::manifest::{LambdaReport, Metrics, RunManifest, Timings};
use crate::{ConfigError, RunError};

pub const LOSS_HISTORY_FILE: &str = "loss_history.csv";
pub const PREDICTION_FILE: &str = "validation_prediction.csv";
pub const ERROR_SURFACE_FILE: &str = "error_surface.csv";
pub const NORMS_FILE: &str = "norms.csv";
pub const LAMBDA_FILE: &str = "lambda_trajectory.csv";

/// Runs whichever task the config names.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    match cfg.task {
        Task::Interpolate => run_interpolate(cfg),
        Task::PinnBurgers => run_pinn(cfg),
        Task::GenBurgersRef => Err(ConfigError("gen-burgers-ref does not produce a run manifest".into()).into()),
    }
}

/// Training and validation sets in raw units.
pub fn load_data(cfg: &ExperimentConfig, source: &DataSource, rng: &RngStream) -> Result<(Dataset, Dataset), RunError> {
    let mut split_rng = rng.child(1);
    match source {
        DataSource::Function(f) => {
            let d = f.dim();
            let domain = Domain::unit(d);
            let x = sample_uniform(&domain, cfg.n_train, &mut split_rng)?;
            let per_dim = match (cfg.validation_grid, d) {
                (0, 2) => 100,
                (0, _) => 21,
                (g, _) => g,
            };
            let xv = grid(&domain, &vec![per_dim; d])?;
            Ok((Dataset::from_function(*f, x)?, Dataset::from_function(*f, xv)?))
        }
        DataSource::Elevation(path) => {
            let ds = load_elevation_grid(path)?;
            split(&ds, cfg.n_train, &mut split_rng)
        }
        DataSource::PointCloud(path, scale) => {
            let pts = load_point_cloud(path, *scale)?;
            let ds = Dataset::from_function(TestFunction::F4, pts)?;
            split(&ds, cfg.n_train, &mut split_rng)
        }
    }
}

fn split(ds: &Dataset, n_train: usize, rng: &mut RngStream) -> Result<(Dataset, Dataset), RunError> {
    if n_train >= ds.len() {
        return Err(ConfigError(format!("n_train = {n_train} leaves no validation rows out of {}", ds.len())).into());
    }
    Ok(ds.split(n_train, rng)?)
}

pub fn run_interpolate(cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    cfg.validate()?;
    let source = cfg.data_source()?;
    let schemes = cfg.normalization_schemes(&source)?;
    let rng = RngStream::new(cfg.seed);
    let (train, val) = load_data(cfg, &source, &rng)?;
    let spec = cfg.spec(train.dim())?;
    let params0 = ParameterSet::glorot(&spec, &mut rng.child(2))?;
    let budget = cfg.iteration_budget();
    let snapshots = if cfg.histogram_epochs.is_empty() {
        default_snapshot_epochs(budget)
    } else {
        cfg.histogram_epochs.clone()
    };
    let diagnostics = DiagnosticsConfig {
        norms: cfg.diagnostics_norms,
        histograms: cfg.diagnostics_histograms,
        layers: cfg.histogram_layers.clone(),
        bins: cfg.histogram_bins,
        snapshot_epochs: snapshots,
    };
    let train_cfg = TrainConfig {
        optimizer: cfg.optimizer()?,
        normalization: schemes,
        validate_every: cfg.validate_every,
        diagnostics,
    };
    let t_train = Instant::now();
    let out = train_interpolation(&spec, &params0, &train, Some(&val), &train_cfg)?;
    let train_s = t_train.elapsed().as_secs_f64();

    let dir = &cfg.output_dir;
    let mut outputs = Vec::new();
    write_output(dir, LOSS_HISTORY_FILE, &loss_history_to_csv(&out.loss_history), &mut outputs)?;
    if !out.failed {
        let (xv, yv) = val.raw()?;
        let pred = predict_raw(&spec, &out.params, &out.normalization, &xv)?;
        write_output(dir, PREDICTION_FILE, &point_table(&xv, &[("y_true", &yv), ("y_pred", &pred)]), &mut outputs)?;
        let err: Vec<f64> = pred.iter().zip(&yv).map(|(p, t)| (p - t).abs()).collect();
        write_output(dir, ERROR_SURFACE_FILE, &point_table(&xv, &[("abs_error", &err)]), &mut outputs)?;
    }
    if let Some(rec) = &out.diagnostics {
        if let Some(e) = rec.error() {
            return Err(RunError::Output(format!("diagnostics failed: {e}")));
        }
        if cfg.diagnostics_norms {
            rec.norms.save(&dir.join(NORMS_FILE))?;
            outputs.push(NORMS_FILE.to_string());
        }
        for (iter, hs) in &rec.histograms {
            let name = format!("histograms_iter{iter}.csv");
            save_histograms(hs, &dir.join(&name))?;
            outputs.push(name);
        }
    }
    let manifest = RunManifest {
        task: "interpolate".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        failed: out.failed,
        stop_reason: out.report.stop.to_string(),
        message: out.report.message.clone(),
        iterations: out.report.iterations,
        evaluations: out.report.evaluations,
        parameter_count: spec.parameter_count(),
        parameter_fingerprint: format!("{:016x}", out.params.fingerprint()),
        timings: Timings {
            total_s: start.elapsed().as_secs_f64(),
            train_s,
        },
        metrics: out.validation.map(Metrics::from),
        train_metrics: out.train.map(Metrics::from),
        lambda: None,
        outputs,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

/// Loads the configured reference grid, generating (and saving) it when absent.
pub fn reference_grid(cfg: &ExperimentConfig) -> Result<ReferenceGrid, RunError> {
    match &cfg.reference_file {
        Some(p) if p.is_file() => Ok(ReferenceGrid::load(p)?),
        _ if !cfg.generate_reference => Err(ConfigError("reference grid missing and generation disabled".into()).into()),
        path => {
            let g = ReferenceGrid::generate(cfg.reference_nx, cfg.reference_nt, 1.0, cfg.nu, cfg.quadrature_nodes)?;
            if let Some(p) = path {
                g.save(p)?;
            }
            Ok(g)
        }
    }
}

pub fn run_gen_reference(cfg: &ExperimentConfig) -> Result<std::path::PathBuf, RunError> {
    cfg.validate()?;
    let path = cfg.reference_file.clone().ok_or_else(|| ConfigError("reference_file not set".into()))?;
    let g = ReferenceGrid::generate(cfg.reference_nx, cfg.reference_nt, 1.0, cfg.nu, cfg.quadrature_nodes)?;
    g.save(&path)?;
    Ok(path)
}

pub fn run_pinn(cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    cfg.validate()?;
    let grid = reference_grid(cfg)?;
    if cfg.n_obs > grid.len() {
        return Err(ConfigError(format!("n_obs = {} exceeds the {} reference points", cfg.n_obs, grid.len())).into());
    }
    let rng = RngStream::new(cfg.seed);
    let spec = cfg.spec(2)?;
    let problem = BurgersInverseProblem::from_reference(
        spec.clone(),
        &grid,
        cfg.n_obs,
        cfg.n_collocation,
        LambdaPair::new(cfg.lambda1_init, cfg.lambda2_init),
        &mut rng.child(1),
    )?;
    let params0 = ParameterSet::glorot(&spec, &mut rng.child(2))?;
    let truth = LambdaPair::new(cfg.lambda1_true, cfg.lambda2_true);
    let t_train = Instant::now();
    let out = solve_inverse(&problem, &params0, &cfg.optimizer()?, Some(truth))?;
    let train_s = t_train.elapsed().as_secs_f64();

    let dir = &cfg.output_dir;
    let mut outputs = Vec::new();
    let history: Vec<LossRecord> = out
        .trajectory
        .iter()
        .skip(1)
        .map(|s| LossRecord {
            iter: s.iter,
            train_mse: s.loss,
            val_rel_l2: None,
            elapsed_s: s.elapsed_s,
        })
        .collect();
    write_output(dir, LOSS_HISTORY_FILE, &loss_history_to_csv(&history), &mut outputs)?;
    let mut lam = String::from("iter,lambda1,lambda2,loss\n");
    for s in &out.trajectory {
        let _ = writeln!(lam, "{},{:?},{:?},{:?}", s.iter, s.lambda.lambda1, s.lambda.lambda2, s.loss);
    }
    write_output(dir, LAMBDA_FILE, &lam, &mut outputs)?;

    let finite = out.params.is_finite() && out.lambda.lambda1.is_finite() && out.lambda.lambda2.is_finite();
    let failed = out.report.stop.is_failure() || !finite;
    let mut metrics = None;
    if finite {
        let x = Matrix::from_vec(grid.len(), 2, grid.points.iter().flat_map(|p| [p[0], p[1]]).collect())?;
        let u: Vec<f64> = grid.points.iter().map(|p| p[2]).collect();
        let pred = predict(&spec, &out.params, &x)?.into_vec();
        let e = EvalResult::compute(&pred, &u)?;
        if e.mse.is_finite() && e.max_abs.is_finite() {
            metrics = Some(Metrics::from(e));
            write_output(dir, PREDICTION_FILE, &point_table(&x, &[("u_true", &u), ("u_pred", &pred)]), &mut outputs)?;
        }
    }
    let lambda = finite.then(|| {
        let (e1, e2) = out.percent_errors.unwrap_or((f64::NAN, f64::NAN));
        LambdaReport {
            lambda1: out.lambda.lambda1,
            lambda2: out.lambda.lambda2,
            lambda1_error_pct: e1,
            lambda2_error_pct: e2,
            mse_u: out.mse_u,
            mse_g: out.mse_g,
        }
    });
    let manifest = RunManifest {
        task: "pinn-burgers".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        failed,
        stop_reason: out.report.stop.to_string(),
        message: out.report.message.clone(),
        iterations: out.report.iterations,
        evaluations: out.report.evaluations,
        parameter_count: problem.n_params() + 2,
        parameter_fingerprint: format!("{:016x}", out.params.fingerprint()),
        timings: Timings {
            total_s: start.elapsed().as_secs_f64(),
            train_s,
        },
        metrics,
        train_metrics: None,
        lambda,
        outputs,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

fn write_output(dir: &Path, name: &str, text: &str, outputs: &mut Vec<String>) -> Result<(), RunError> {
    write_atomic(&dir.join(name), text.as_bytes())?;
    outputs.push(name.to_string());
    Ok(())
}

/// `x1,…,xd,<columns>` with one row per input point.
fn point_table(x: &Matrix, columns: &[(&str, &[f64])]) -> String {
    let mut s = String::new();
    let names: Vec<String> = (1..=x.cols())
        .map(|j| format!("x{j}"))
        .chain(columns.iter().map(|(n, _)| n.to_string()))
        .collect();
    s.push_str(&names.join(","));
    s.push('\n');
    for i in 0..x.rows() {
        let mut fields: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
        fields.extend(columns.iter().map(|(_, c)| format!("{:?}", c[i])));
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}
