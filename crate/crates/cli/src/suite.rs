//! Cartesian sweeps over config keys, one run per combination, summarized in
//! a single comparison table.

use std::fmt::Write as _;
use std::path::PathBuf;

use powernet::data::write_atomic;

use crate::config::{ExperimentConfig, RawConfig, Task};
use crate::manifest::RunManifest;
use crate::run::run;
use crate::{ConfigError, RunError};

pub const SUITE_FILE: &str = "suite.csv";

const COLUMNS: &str = "run,architecture,power,n_train,neurons,layers,optimizer,seed,status,stop_reason,\
iterations,mse,rel_l2,max_abs,lambda1,lambda2,train_s,output_dir";

/// One resolved run of the sweep.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub config: ExperimentConfig,
    pub outcome: Result<RunManifest, String>,
}

/// Every combination of the sweep values, in key order with the last key
/// varying fastest. Each run writes into `<output_dir>/run_NNN`.
pub fn expand(raw: &RawConfig) -> Result<Vec<ExperimentConfig>, ConfigError> {
    if raw.sweep.is_empty() {
        return Err(ConfigError("suite needs a [sweep] table with at least one key".into()));
    }
    if let Some((k, _)) = raw.sweep.iter().find(|(_, v)| v.is_empty()) {
        return Err(ConfigError(format!("sweep.{k} is empty")));
    }
    if raw.sweep.contains_key("output_dir") || raw.sweep.contains_key("task") {
        return Err(ConfigError("output_dir and task cannot be swept".into()));
    }
    let base = raw.resolve()?;
    if base.task == Task::GenBurgersRef {
        return Err(ConfigError("gen-burgers-ref cannot be run as a suite".into()));
    }
    let keys: Vec<&String> = raw.sweep.keys().collect();
    let sizes: Vec<usize> = keys.iter().map(|k| raw.sweep[*k].len()).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut r = raw.clone();
        let mut rem = idx;
        for (k, n) in keys.iter().zip(&sizes).rev() {
            r.values.insert((*k).clone(), raw.sweep[*k][rem % n].clone());
            rem /= n;
        }
        let dir: PathBuf = base.output_dir.join(format!("run_{idx:03}"));
        r.values
            .insert("output_dir".into(), toml::Value::String(dir.to_string_lossy().into_owned()));
        let cfg = r.resolve().map_err(|e| ConfigError(format!("run {idx}: {}", e.0)))?;
        cfg.validate().map_err(|e| ConfigError(format!("run {idx}: {}", e.0)))?;
        out.push(cfg);
    }
    Ok(out)
}

/// Runs every combination. A run that fails is recorded in the table and
/// the suite carries on.
pub fn run_suite(raw: &RawConfig, mut progress: impl FnMut(usize, usize, &SuiteRun)) -> Result<Vec<SuiteRun>, RunError> {
    let configs = expand(raw)?;
    let base = raw.resolve()?;
    let total = configs.len();
    let mut runs = Vec::with_capacity(total);
    for (i, config) in configs.into_iter().enumerate() {
        let outcome = run(&config).map_err(|e| e.to_string());
        let r = SuiteRun { config, outcome };
        progress(i + 1, total, &r);
        runs.push(r);
    }
    write_atomic(&base.output_dir.join(SUITE_FILE), table(&runs).as_bytes())?;
    Ok(runs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn table(runs: &[SuiteRun]) -> String {
    let mut s = format!("{COLUMNS}\n");
    for (i, r) in runs.iter().enumerate() {
        let c = &r.config;
        let (status, stop, iters, m, lam, train_s) = match &r.outcome {
            Ok(m) => (
                if m.failed { "failed" } else { "ok" },
                m.stop_reason.clone(),
                m.iterations.to_string(),
                m.metrics,
                m.lambda,
                format!("{:.3}", m.timings.train_s),
            ),
            Err(_) => ("error", String::new(), String::new(), None, None, String::new()),
        };
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{status},{stop},{iters},{},{},{},{},{},{train_s},{}",
            c.architecture,
            c.power,
            c.n_train,
            c.neurons,
            c.layers,
            c.optimizer,
            c.seed,
            opt(m.map(|m| m.mse)),
            opt(m.and_then(|m| m.rel_l2)),
            opt(m.map(|m| m.max_abs)),
            opt(lam.map(|l| l.lambda1)),
            opt(lam.map(|l| l.lambda2)),
            c.output_dir.display(),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_grid_has_eight_runs_per_architecture() {
        let raw = RawConfig::parse(
            "optimizer = \"adam\"\noutput_dir = \"out\"\n[sweep]\narchitecture = [\"plain\", \"sqr_skip_resnet\"]\n\
             n_train = [200, 1000]\nneurons = [50, 100]\nlayers = [5, 10]\n",
        )
        .unwrap();
        let cfgs = expand(&raw).unwrap();
        assert_eq!(cfgs.len(), 16);
        assert_eq!(cfgs.iter().filter(|c| c.architecture == "plain").count(), 8);
        let mut dirs: Vec<_> = cfgs.iter().map(|c| c.output_dir.clone()).collect();
        dirs.dedup();
        assert_eq!(dirs.len(), 16);
        // Last key varies fastest: neurons is last alphabetically.
        assert_eq!((cfgs[0].neurons, cfgs[1].neurons), (50, 100));
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(expand(&RawConfig::parse("seed = 1").unwrap()).is_err());
        assert!(expand(&RawConfig::parse("[sweep]\nseed = []").unwrap()).is_err());
    }

    #[test]
    fn invalid_combination_is_a_config_error() {
        let raw = RawConfig::parse("[sweep]\nfunction = [\"f1\", \"nope\"]").unwrap();
        assert!(expand(&raw).is_err());
    }
}
