//! Training-dynamics instrumentation: weight norms per epoch, histograms of
//! back-propagated weight gradients, and loss histories, with CSV export.
//!
//! Column layouts:
//!
//! - norms: `epoch,layer,frobenius`, one row per layer per epoch; the
//!   all-layer aggregate uses the layer label `all`
//! - wide norms: `epoch,w1,…,wL`
//! - histograms: `layer,bin_lo,bin_hi,count`
//! - loss history: `iter,train_mse,val_rel_l2,elapsed_s`; an empty
//!   `val_rel_l2` field means no validation was computed at that iteration

use std::fmt::Write as _;
use std::path::Path;

use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;
use crate::network::{ArchitectureSpec, ParameterSet};
use crate::optim::Iteration;

/// Number of histogram bins when none is configured.
pub const DEFAULT_BINS: usize = 50;

/// Hidden layers shown in the gradient-histogram figure.
pub const DEFAULT_HISTOGRAM_LAYERS: [usize; 3] = [1, 5, 9];

#[derive(Debug, Clone, PartialEq)]
pub struct NormRecord {
    pub epoch: usize,
    /// `‖W(l)‖_F` for every affine layer, output layer last.
    pub per_layer: Vec<f64>,
    pub aggregate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormHistory {
    pub records: Vec<NormRecord>,
}

impl NormHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_layers(&self) -> Option<usize> {
        self.records.first().map(|r| r.per_layer.len())
    }

    fn push(&mut self, rec: NormRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if rec.epoch <= last.epoch {
                return Err(Error::contract(format!(
                    "epoch {} recorded after epoch {}",
                    rec.epoch, last.epoch
                )));
            }
            if rec.per_layer.len() != last.per_layer.len() {
                return Err(Error::contract("layer count changed between epochs"));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    /// Appends the Frobenius norm of every weight matrix of `params`.
    pub fn record_norms(&mut self, params: &ParameterSet, epoch: usize) -> Result<()> {
        let per_layer = params
            .layers
            .iter()
            .map(|l| frobenius_norm([&l.weight]))
            .collect::<Result<Vec<_>>>()?;
        let aggregate = frobenius_norm(params.layers.iter().map(|l| &l.weight))?;
        self.push(NormRecord {
            epoch,
            per_layer,
            aggregate,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,layer,frobenius\n");
        for r in &self.records {
            for (l, v) in r.per_layer.iter().enumerate() {
                let _ = writeln!(s, "{},{},{v:?}", r.epoch, l + 1);
            }
            let _ = writeln!(s, "{},all,{:?}", r.epoch, r.aggregate);
        }
        s
    }

    /// One row per epoch, one column per layer. The aggregate is omitted.
    pub fn to_wide_csv(&self) -> String {
        let mut s = String::from("epoch");
        for l in 1..=self.n_layers().unwrap_or(0) {
            let _ = write!(s, ",w{l}");
        }
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{}", r.epoch);
            for v in &r.per_layer {
                let _ = write!(s, ",{v:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rows = csv_rows(text, path, &["epoch", "layer", "frobenius"])?;
        let mut hist = NormHistory::new();
        let mut current: Option<NormRecord> = None;
        for (no, f) in rows.by_ref() {
            let epoch = parse_usize(f[0], no, "epoch", path)?;
            let value = parse_f64(f[2], no, "frobenius", path)?;
            if value < 0.0 {
                return Err(Error::parse(path, no, "negative norm"));
            }
            let rec = current.get_or_insert_with(|| NormRecord {
                epoch,
                per_layer: Vec::new(),
                aggregate: f64::NAN,
            });
            if rec.epoch != epoch {
                return Err(Error::parse(path, no, format!("epoch {} has no aggregate row", rec.epoch)));
            }
            if f[1] == "all" {
                rec.aggregate = value;
                let done = current.take().expect("record in progress");
                hist.push(done).map_err(|e| Error::parse(path, no, e.to_string()))?;
            } else {
                let layer = parse_usize(f[1], no, "layer", path)?;
                if layer != rec.per_layer.len() + 1 {
                    return Err(Error::parse(path, no, format!("expected layer {}", rec.per_layer.len() + 1)));
                }
                rec.per_layer.push(value);
            }
        }
        if let Some(rec) = current {
            return Err(Error::parse(path, 0, format!("epoch {} has no aggregate row", rec.epoch)));
        }
        Ok(hist)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, path)
    }
}

/// Histogram of one layer's weight-gradient entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHistogram {
    /// 1-based affine layer index.
    pub layer: usize,
    /// `bins + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl GradHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn from_values(layer: usize, values: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::contract("a histogram needs at least 2 bins"));
        }
        if values.is_empty() {
            return Err(Error::contract("histogram of an empty selection"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of layer {layer}")));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let half = 0.5 * lo.abs().max(1.0);
            (lo - half, lo + half)
        };
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        edges[bins] = hi;
        let mut counts = vec![0u64; bins];
        for v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(GradHistogram { layer, edges, counts })
    }
}

/// Histogram of `∂L/∂W(layer)` with `bins` uniform bins spanning the
/// observed range. A constant gradient lands in a single bin.
pub fn histogram_gradients(grad: &ParameterSet, layer: usize, bins: usize) -> Result<GradHistogram> {
    let n = grad.layers.len();
    if layer == 0 || layer > n {
        return Err(Error::contract(format!("layer {layer} not in 1..={n}")));
    }
    GradHistogram::from_values(layer, grad.layers[layer - 1].weight.as_slice(), bins)
}

pub fn histograms_to_csv(hists: &[GradHistogram]) -> String {
    let mut s = String::from("layer,bin_lo,bin_hi,count\n");
    for h in hists {
        for (k, c) in h.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{:?},{:?},{c}", h.layer, h.edges[k], h.edges[k + 1]);
        }
    }
    s
}

/// Consecutive rows with the same layer form one histogram.
pub fn parse_histograms(text: &str, path: &Path) -> Result<Vec<GradHistogram>> {
    let rows = csv_rows(text, path, &["layer", "bin_lo", "bin_hi", "count"])?;
    let mut out: Vec<GradHistogram> = Vec::new();
    for (no, f) in rows {
        let layer = parse_usize(f[0], no, "layer", path)?;
        let lo = parse_f64(f[1], no, "bin_lo", path)?;
        let hi = parse_f64(f[2], no, "bin_hi", path)?;
        let count: u64 = f[3]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("count: '{}' is not a count", f[3])))?;
        if !(hi > lo) {
            return Err(Error::parse(path, no, "bin edges not increasing"));
        }
        match out.last_mut() {
            Some(h) if h.layer == layer => {
                if *h.edges.last().expect("edges") != lo {
                    return Err(Error::parse(path, no, "bins are not contiguous"));
                }
                h.edges.push(hi);
                h.counts.push(count);
            }
            _ => out.push(GradHistogram {
                layer,
                edges: vec![lo, hi],
                counts: vec![count],
            }),
        }
    }
    Ok(out)
}

pub fn save_histograms(hists: &[GradHistogram], path: &Path) -> Result<()> {
    write_atomic(path, histograms_to_csv(hists).as_bytes())
}

pub fn load_histograms(path: &Path) -> Result<Vec<GradHistogram>> {
    parse_histograms(&read(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    pub train_mse: f64,
    pub val_rel_l2: Option<f64>,
    pub elapsed_s: f64,
}

pub fn loss_history_to_csv(rows: &[LossRecord]) -> String {
    let mut s = String::from("iter,train_mse,val_rel_l2,elapsed_s\n");
    for r in rows {
        let val = r.val_rel_l2.map(|v| format!("{v:?}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:?},{val},{:?}", r.iter, r.train_mse, r.elapsed_s);
    }
    s
}

pub fn parse_loss_history(text: &str, path: &Path) -> Result<Vec<LossRecord>> {
    let rows = csv_rows(text, path, &["iter", "train_mse", "val_rel_l2", "elapsed_s"])?;
    rows.map(|(no, f)| {
        Ok(LossRecord {
            iter: parse_usize(f[0], no, "iter", path)?,
            train_mse: parse_f64(f[1], no, "train_mse", path)?,
            val_rel_l2: if f[2].is_empty() {
                None
            } else {
                Some(parse_f64(f[2], no, "val_rel_l2", path)?)
            },
            elapsed_s: parse_f64(f[3], no, "elapsed_s", path)?,
        })
    })
    .collect()
}

/// Epochs at which gradient histograms are captured by default: first,
/// middle and last.
pub fn default_snapshot_epochs(total: usize) -> Vec<usize> {
    let mut e = vec![1, total.div_ceil(2), total];
    e.retain(|&x| x >= 1);
    e.dedup();
    e
}

/// Settings for [`Recorder`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub norms: bool,
    pub histograms: bool,
    pub layers: Vec<usize>,
    pub bins: usize,
    /// Iterations at which histograms are taken.
    pub snapshot_epochs: Vec<usize>,
}

impl DiagnosticsConfig {
    pub fn disabled() -> Self {
        DiagnosticsConfig {
            norms: false,
            histograms: false,
            layers: Vec::new(),
            bins: DEFAULT_BINS,
            snapshot_epochs: Vec::new(),
        }
    }

    /// Norms every iteration and histograms of the default layers at the
    /// default snapshots of a run of `total` iterations. Layers deeper than
    /// the network are dropped.
    pub fn standard(spec: &ArchitectureSpec, total: usize) -> Self {
        DiagnosticsConfig {
            norms: true,
            histograms: true,
            layers: DEFAULT_HISTOGRAM_LAYERS.iter().copied().filter(|&l| l <= spec.n_hidden()).collect(),
            bins: DEFAULT_BINS,
            snapshot_epochs: default_snapshot_epochs(total),
        }
    }
}

/// Optimizer observer that fills a [`NormHistory`] and gradient histograms.
/// Only the leading `spec.parameter_count()` entries of θ are read, so
/// trailing parameters such as PDE coefficients are ignored.
#[derive(Debug, Clone)]
pub struct Recorder {
    spec: ArchitectureSpec,
    config: DiagnosticsConfig,
    pub norms: NormHistory,
    /// `(iteration, histograms)` per snapshot.
    pub histograms: Vec<(usize, Vec<GradHistogram>)>,
    error: Option<String>,
}

impl Recorder {
    pub fn new(spec: &ArchitectureSpec, config: DiagnosticsConfig) -> Result<Self> {
        spec.validate()?;
        if config.histograms && config.bins < 2 {
            return Err(Error::contract("a histogram needs at least 2 bins"));
        }
        let n = spec.n_hidden() + 1;
        if let Some(bad) = config.layers.iter().find(|&&l| l == 0 || l > n) {
            return Err(Error::contract(format!("histogram layer {bad} not in 1..={n}")));
        }
        Ok(Recorder {
            spec: spec.clone(),
            config,
            norms: NormHistory::new(),
            histograms: Vec::new(),
            error: None,
        })
    }

    /// Records the initial parameters as epoch 0.
    pub fn record_initial(&mut self, params: &ParameterSet) -> Result<()> {
        if self.config.norms {
            self.norms.record_norms(params, 0)?;
        }
        Ok(())
    }

    pub fn observe(&mut self, it: &Iteration<'_>) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.try_observe(it) {
            self.error = Some(e.to_string());
        }
    }

    fn try_observe(&mut self, it: &Iteration<'_>) -> Result<()> {
        let p = self.spec.parameter_count();
        if it.theta.len() < p || it.grad.len() < p {
            return Err(Error::contract("iterate shorter than the network"));
        }
        if self.config.norms {
            let params = ParameterSet::unflatten(&it.theta[..p], &self.spec)?;
            self.norms.record_norms(&params, it.iter)?;
        }
        if self.config.histograms && self.config.snapshot_epochs.contains(&it.iter) {
            let grad = ParameterSet::unflatten(&it.grad[..p], &self.spec)?;
            let hs = self
                .config
                .layers
                .iter()
                .map(|&l| histogram_gradients(&grad, l, self.config.bins))
                .collect::<Result<Vec<_>>>()?;
            self.histograms.push((it.iter, hs));
        }
        Ok(())
    }

    /// First failure seen while observing, if any.
    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

type Rows<'a> = Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>;

fn csv_rows<'a>(text: &'a str, path: &Path, header: &[&str]) -> Result<Rows<'a>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.split(',').map(str::trim).eq(header.iter().copied()) => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {}", header.join(",")))),
    }
    let n = header.len();
    let path = path.to_path_buf();
    let rows = lines.map(move |(i, l)| (i + 1, l.split(',').map(str::trim).collect::<Vec<_>>()));
    let mut checked = Vec::new();
    for (no, f) in rows {
        if f.len() != n {
            return Err(Error::parse(&path, no, format!("expected {n} fields, got {}", f.len())));
        }
        checked.push((no, f));
    }
    Ok(Box::new(checked.into_iter()))
}

fn parse_f64(s: &str, line: usize, name: &str, path: &Path) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{name}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("{name}: non-finite value")));
    }
    Ok(v)
}

fn parse_usize(s: &str, line: usize, name: &str, path: &Path) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(path, line, format!("{name}: '{s}' is not a non-negative integer")))
}
