use std::path::Path;

use powernet::data::write_atomic;
use powernet::metrics::EvalResult;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::RunError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rel_l2: Option<f64>,
    pub max_abs: f64,
    pub n: usize,
}

impl From<EvalResult> for Metrics {
    fn from(e: EvalResult) -> Self {
        Metrics {
            mse: e.mse,
            rel_l2: e.rel_l2.filter(|v| v.is_finite()),
            max_abs: e.max_abs,
            n: e.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub train_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda1_error_pct: f64,
    pub lambda2_error_pct: f64,
    pub mse_u: f64,
    pub mse_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: String,
    pub code_version: String,
    /// Fully resolved configuration; running it again reproduces the run.
    pub config: ExperimentConfig,
    pub failed: bool,
    pub stop_reason: String,
    pub message: Option<String>,
    pub iterations: usize,
    pub evaluations: usize,
    pub parameter_count: usize,
    /// Hash of the final parameters, for comparing reruns.
    pub parameter_fingerprint: String,
    pub timings: Timings,
    /// Validation metrics in raw units (the reference grid for PINN runs).
    pub metrics: Option<Metrics>,
    pub train_metrics: Option<Metrics>,
    pub lambda: Option<LambdaReport>,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<(), RunError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| RunError::Output(e.to_string()))?;
        write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))
    }

    /// The manifest with wall-clock fields zeroed, for rerun comparisons.
    pub fn without_timings(&self) -> Self {
        RunManifest {
            timings: Timings {
                total_s: 0.0,
                train_s: 0.0,
            },
            ..self.clone()
        }
    }
}
