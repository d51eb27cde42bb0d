//! Flat key-value experiment configuration.
//!
//! A config file is TOML with one `key = value` per line. Every key has a
//! default, so an empty file is a valid interpolation config. `--set k=v`
//! overrides are applied after the file. A `[sweep]` table of arrays is only
//! read by the `suite` subcommand. Relative paths are taken from the
//! working directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use powernet::data::{NormalizationScheme, TestFunction};
use powernet::diagnostics::DEFAULT_BINS;
use powernet::network::{ArchitectureKind, ArchitectureSpec};
use powernet::optim::{AdamSettings, ConvergenceCriteria, LbfgsSettings, Optimizer};
use powernet::pinn::{LambdaPair, BENCHMARK_NU, MAX_HERMITE_NODES};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Interpolate,
    PinnBurgers,
    GenBurgersRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,

    /// `plain`, `resnet`, `skip_resnet` or `sqr_skip_resnet`.
    pub architecture: String,
    /// Exponent of the power skip; only read for `sqr_skip_resnet`.
    pub power: u32,
    /// Hidden layers, `n_l`.
    pub layers: usize,
    /// Neurons per hidden layer, `n_n`.
    pub neurons: usize,

    /// Builtin target `f1`..`f4`, used when no data file is given.
    pub function: String,
    /// Elevation CSV with header `x1,x2,y`.
    pub data_file: Option<PathBuf>,
    /// Point cloud whose targets are `f4` at the (scaled) points.
    pub point_cloud_file: Option<PathBuf>,
    pub point_cloud_scale: f64,
    pub n_train: usize,
    /// Validation grid points per dimension for builtin targets; 0 picks
    /// 100 in 2-D and 21 in 3-D. File data validates on the held-out rows.
    pub validation_grid: usize,
    /// Comma-separated schemes, `auto`, or `none`. `auto` is `none` for
    /// builtin targets and `input_unit_box,target_zscore` for files.
    pub normalization: String,

    /// `lbfgs` or `adam`.
    pub optimizer: String,
    pub lr: f64,
    pub adam_iterations: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub f_change_tol: f64,
    pub history_size: usize,

    pub seed: u64,
    pub output_dir: PathBuf,

    pub validate_every: usize,
    pub diagnostics_norms: bool,
    pub diagnostics_histograms: bool,
    pub histogram_layers: Vec<usize>,
    pub histogram_bins: usize,
    /// Iterations at which histograms are taken; empty means first, middle, last.
    pub histogram_epochs: Vec<usize>,

    pub n_obs: usize,
    pub n_collocation: usize,
    pub lambda1_init: f64,
    pub lambda2_init: f64,
    pub lambda1_true: f64,
    pub lambda2_true: f64,
    /// Reference grid CSV `x,t,u`. Generated when missing and
    /// `generate_reference` is set.
    pub reference_file: Option<PathBuf>,
    pub generate_reference: bool,
    pub reference_nx: usize,
    pub reference_nt: usize,
    pub quadrature_nodes: usize,
    pub nu: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let adam = AdamSettings::default();
        let crit = ConvergenceCriteria::default();
        ExperimentConfig {
            task: Task::Interpolate,
            architecture: "sqr_skip_resnet".into(),
            power: 2,
            layers: 10,
            neurons: 50,
            function: "f1".into(),
            data_file: None,
            point_cloud_file: None,
            point_cloud_scale: 10.0,
            n_train: 500,
            validation_grid: 0,
            normalization: "auto".into(),
            optimizer: "lbfgs".into(),
            lr: adam.lr,
            adam_iterations: adam.iterations,
            max_iter: crit.max_iter,
            grad_tol: crit.grad_tol,
            f_change_tol: crit.f_change_tol,
            history_size: LbfgsSettings::default().history_size,
            seed: 0,
            output_dir: PathBuf::from("runs/out"),
            validate_every: 100,
            diagnostics_norms: false,
            diagnostics_histograms: false,
            histogram_layers: vec![1, 5, 9],
            histogram_bins: DEFAULT_BINS,
            histogram_epochs: Vec::new(),
            n_obs: 500,
            n_collocation: 10_000,
            lambda1_init: LambdaPair::INITIAL.lambda1,
            lambda2_init: LambdaPair::INITIAL.lambda2,
            lambda1_true: LambdaPair::TRUTH.lambda1,
            lambda2_true: LambdaPair::TRUTH.lambda2,
            reference_file: None,
            generate_reference: true,
            reference_nx: 256,
            reference_nt: 100,
            quadrature_nodes: 100,
            nu: BENCHMARK_NU,
        }
    }
}

/// Where interpolation data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Function(TestFunction),
    Elevation(PathBuf),
    PointCloud(PathBuf, f64),
}

/// A parsed file plus overrides, before typing. Kept as a table so suite
/// runs can substitute swept values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub values: toml::Table,
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

impl RawConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(RawConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError(e.to_string()))?;
        let mut sweep = BTreeMap::new();
        if let Some(s) = values.remove("sweep") {
            let toml::Value::Table(t) = s else {
                return Err(ConfigError("sweep must be a table of arrays".into()));
            };
            for (k, v) in t {
                let toml::Value::Array(a) = v else {
                    return Err(ConfigError(format!("sweep.{k} must be an array")));
                };
                sweep.insert(k, a);
            }
        }
        for (k, v) in &values {
            if matches!(v, toml::Value::Table(_)) {
                return Err(ConfigError(format!("unexpected table '{k}'; the config is flat")));
            }
        }
        Ok(RawConfig { values, sweep })
    }

    /// Applies a `key=value` override. The value is read as TOML, falling
    /// back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override '{assignment}' is not key=value")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError(format!("override '{assignment}' has an empty key")));
        }
        self.values.insert(key.to_string(), parse_value(v.trim()));
        Ok(())
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig = toml::Value::Table(self.values.clone())
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
        Ok(cfg)
    }
}

pub(crate) fn parse_value(v: &str) -> toml::Value {
    format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

impl ExperimentConfig {
    pub fn kind(&self) -> Result<ArchitectureKind, ConfigError> {
        ArchitectureKind::from_str(&self.architecture).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn spec(&self, input_dim: usize) -> Result<ArchitectureSpec, ConfigError> {
        let kind = self.kind()?;
        let mut spec = ArchitectureSpec::uniform(kind, input_dim, self.layers, self.neurons, 1);
        if kind == ArchitectureKind::SqrSkipResNet {
            spec = spec.with_power(self.power);
        }
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(spec)
    }

    pub fn data_source(&self) -> Result<DataSource, ConfigError> {
        match (&self.data_file, &self.point_cloud_file) {
            (Some(_), Some(_)) => Err(ConfigError("set at most one of data_file and point_cloud_file".into())),
            (Some(p), None) => Ok(DataSource::Elevation(p.clone())),
            (None, Some(p)) => Ok(DataSource::PointCloud(p.clone(), self.point_cloud_scale)),
            (None, None) => TestFunction::from_str(&self.function)
                .map(DataSource::Function)
                .map_err(|_| ConfigError(format!("unknown function '{}'", self.function))),
        }
    }

    pub fn normalization_schemes(&self, source: &DataSource) -> Result<Vec<NormalizationScheme>, ConfigError> {
        match self.normalization.trim() {
            "auto" => Ok(match source {
                DataSource::Function(_) => vec![],
                _ => vec![NormalizationScheme::InputUnitBox, NormalizationScheme::TargetZscore],
            }),
            "none" | "" => Ok(vec![]),
            list => list
                .split(',')
                .map(|s| NormalizationScheme::from_str(s.trim()).map_err(|e| ConfigError(e.to_string())))
                .collect(),
        }
    }

    pub fn optimizer(&self) -> Result<Optimizer, ConfigError> {
        match self.optimizer.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(Optimizer::Adam(AdamSettings {
                lr: self.lr,
                iterations: self.adam_iterations,
                ..Default::default()
            })),
            "lbfgs" | "l-bfgs" | "l_bfgs" => Ok(Optimizer::Lbfgs(LbfgsSettings {
                criteria: ConvergenceCriteria {
                    grad_tol: self.grad_tol,
                    f_change_tol: self.f_change_tol,
                    max_iter: self.max_iter,
                },
                history_size: self.history_size,
                ..Default::default()
            })),
            other => Err(ConfigError(format!("unknown optimizer '{other}'"))),
        }
    }

    pub fn iteration_budget(&self) -> usize {
        match self.optimizer().ok() {
            Some(Optimizer::Adam(s)) => s.iterations,
            _ => self.max_iter,
        }
    }

    /// Checks everything that can be checked before any data is loaded or
    /// any training starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.layers == 0 || self.neurons == 0 {
            return err("layers and neurons must be at least 1".into());
        }
        if self.power == 0 {
            return err("power must be at least 1".into());
        }
        self.kind()?;
        self.optimizer()?;
        if !(self.lr > 0.0) {
            return err(format!("lr must be positive, got {}", self.lr));
        }
        if self.history_size == 0 {
            return err("history_size must be at least 1".into());
        }
        if !(self.grad_tol >= 0.0 && self.f_change_tol >= 0.0) {
            return err("tolerances must be non-negative".into());
        }
        match self.task {
            Task::Interpolate => {
                let source = self.data_source()?;
                self.normalization_schemes(&source)?;
                match &source {
                    DataSource::Elevation(p) | DataSource::PointCloud(p, _) if !p.is_file() => {
                        return err(format!("data file {} does not exist", p.display()));
                    }
                    DataSource::PointCloud(_, s) if !(s.is_finite() && *s > 0.0) => {
                        return err("point_cloud_scale must be positive".into());
                    }
                    _ => {}
                }
                if self.n_train == 0 {
                    return err("n_train must be at least 1".into());
                }
                if self.validation_grid == 1 {
                    return err("validation_grid must be 0 (auto) or at least 2".into());
                }
                if self.diagnostics_histograms {
                    if self.histogram_bins < 2 {
                        return err("histogram_bins must be at least 2".into());
                    }
                    let n = self.layers + 1;
                    if let Some(l) = self.histogram_layers.iter().find(|&&l| l == 0 || l > n) {
                        return err(format!("histogram layer {l} not in 1..={n}"));
                    }
                }
            }
            Task::PinnBurgers => {
                if self.n_obs == 0 || self.n_collocation == 0 {
                    return err("n_obs and n_collocation must be at least 1".into());
                }
                if !(self.lambda1_true != 0.0 && self.lambda2_true != 0.0) {
                    return err("true lambdas must be nonzero".into());
                }
                match &self.reference_file {
                    Some(p) if !p.is_file() && !self.generate_reference => {
                        return err(format!("reference file {} does not exist and generation is disabled", p.display()));
                    }
                    None if !self.generate_reference => {
                        return err("no reference_file given and generation is disabled".into());
                    }
                    _ => {}
                }
                self.check_reference_settings()?;
            }
            Task::GenBurgersRef => {
                if self.reference_file.is_none() {
                    return err("gen-burgers-ref needs reference_file".into());
                }
                self.check_reference_settings()?;
            }
        }
        Ok(())
    }

    fn check_reference_settings(&self) -> Result<(), ConfigError> {
        if self.reference_nx < 2 || self.reference_nt < 2 {
            return Err(ConfigError("reference_nx and reference_nt must be at least 2".into()));
        }
        if self.quadrature_nodes < 100 || self.quadrature_nodes > MAX_HERMITE_NODES {
            return Err(ConfigError(format!(
                "quadrature_nodes must be in 100..={MAX_HERMITE_NODES}"
            )));
        }
        if !(self.nu > 0.0) {
            return Err(ConfigError("nu must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_documented_defaults() {
        let cfg = RawConfig::parse("").unwrap().resolve().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.adam_iterations, 10_000);
        assert_eq!(cfg.grad_tol, 1e-9);
        assert_eq!(cfg.f_change_tol, 1e-9);
        assert_eq!(cfg.power, 2);
        assert_eq!(cfg.neurons, 50);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_are_typed() {
        let mut raw = RawConfig::parse("layers = 3\narchitecture = \"plain\"\n").unwrap();
        raw.set("layers=5").unwrap();
        raw.set("optimizer=adam").unwrap();
        raw.set("lr = 0.01").unwrap();
        raw.set("histogram_layers=[1,2]").unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.layers, 5);
        assert_eq!(cfg.optimizer, "adam");
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.histogram_layers, vec![1, 2]);
        assert!(raw.set("novalue").is_err());
    }

    #[test]
    fn unknown_keys_and_names_rejected() {
        assert!(RawConfig::parse("layerz = 3").unwrap().resolve().is_err());
        let cfg = RawConfig::parse("function = \"f9\"").unwrap().resolve().unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RawConfig::parse("optimizer = \"sgd\"").unwrap().resolve().unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RawConfig::parse("layers = 0").unwrap().resolve().unwrap();
        assert!(cfg.validate().is_err());
        assert!(RawConfig::parse("[extra]\na = 1").is_err());
    }

    #[test]
    fn missing_files_rejected() {
        let cfg = RawConfig::parse("data_file = \"/nonexistent/x.csv\"").unwrap().resolve().unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RawConfig::parse(
            "task = \"pinn-burgers\"\nreference_file = \"/nonexistent/r.csv\"\ngenerate_reference = false",
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_table_is_separated() {
        let raw = RawConfig::parse("seed = 1\n[sweep]\nlayers = [5, 10]\narchitecture = [\"plain\", \"sqr\"]\n").unwrap();
        assert_eq!(raw.sweep.len(), 2);
        assert_eq!(raw.sweep["layers"].len(), 2);
        assert!(!raw.values.contains_key("sweep"));
        assert!(RawConfig::parse("[sweep]\nlayers = 5").is_err());
    }

    #[test]
    fn auto_normalization_depends_on_source() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.normalization_schemes(&DataSource::Function(TestFunction::F1)).unwrap().is_empty());
        assert_eq!(cfg.normalization_schemes(&DataSource::Elevation("a".into())).unwrap().len(), 2);
        let cfg = ExperimentConfig {
            normalization: "target_zscore".into(),
            ..Default::default()
        };
        assert_eq!(
            cfg.normalization_schemes(&DataSource::Function(TestFunction::F1)).unwrap(),
            vec![NormalizationScheme::TargetZscore]
        );
    }
}
