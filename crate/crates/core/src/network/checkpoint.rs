//! Text checkpoints of an architecture plus its flat parameter vector.
//!
//! Layout (version 1):
//!
//! ```text
//! powernet-checkpoint 1
//! kind = sqr_skip_resnet
//! power = 2
//! activation = tanh
//! residuals = true
//! input_dim = 2
//! hidden_widths = 50 50 50
//! output_dim = 1
//! extras = 0
//! values = 5301
//! <one value per line, shortest round-trip decimal form>
//! ```
//!
//! `extras` counts trailing scalars stored after the network parameters
//! (the PDE coefficients of an inverse problem, for example). Values are
//! printed with Rust's shortest round-trip formatting, so loading
//! reproduces every bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Activation, ArchitectureKind, ArchitectureSpec};

const MAGIC: &str = "powernet-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ArchitectureSpec,
    /// Network parameters in flat layout followed by `extras` scalars.
    pub values: Vec<f64>,
    pub extras: usize,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let widths: Vec<String> = s.hidden_widths.iter().map(ToString::to_string).collect();
        let mut out = format!(
            "{MAGIC}\nkind = {}\npower = {}\nactivation = {}\nresiduals = {}\ninput_dim = {}\nhidden_widths = {}\noutput_dim = {}\nextras = {}\nvalues = {}\n",
            s.kind.name(),
            s.power,
            s.activation.name(),
            s.residuals,
            s.input_dim,
            widths.join(" "),
            s.output_dim,
            self.extras,
            self.values.len()
        );
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self.values.len() != self.spec.parameter_count() + self.extras {
            return Err(Error::contract("checkpoint value count does not match architecture"));
        }
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, msg: &str| Error::parse(path, line, msg);
        if lines.next().map(|(_, l)| l) != Some(MAGIC) {
            return Err(err(1, "missing checkpoint header"));
        }
        let mut header = std::collections::BTreeMap::new();
        let mut values_line = 0;
        let mut count = 0;
        for (n, line) in lines.by_ref() {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(n, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "values" {
                count = value.parse::<usize>().map_err(|_| err(n, "bad value count"))?;
                values_line = n;
                break;
            }
            header.insert(key.to_string(), (n, value.to_string()));
        }
        if values_line == 0 {
            return Err(err(text.lines().count(), "missing 'values' line"));
        }
        let get = |key: &str| -> Result<(usize, String)> {
            header
                .get(key)
                .cloned()
                .ok_or_else(|| err(values_line, &format!("missing '{key}'")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            let (n, v) = get(key)?;
            v.parse().map_err(|_| err(n, &format!("'{key}' must be a non-negative integer")))
        };
        let (kn, kind) = get("kind")?;
        let kind: ArchitectureKind = kind.parse().map_err(|_| err(kn, "unknown kind"))?;
        let (an, activation) = get("activation")?;
        let activation: Activation = activation.parse().map_err(|_| err(an, "unknown activation"))?;
        let (rn, residuals) = get("residuals")?;
        let residuals = residuals.parse::<bool>().map_err(|_| err(rn, "residuals must be true/false"))?;
        let (hn, widths) = get("hidden_widths")?;
        let hidden_widths = widths
            .split_whitespace()
            .map(|w| w.parse::<usize>().map_err(|_| err(hn, "bad hidden width")))
            .collect::<Result<Vec<_>>>()?;
        let spec = ArchitectureSpec {
            kind,
            input_dim: parse_usize("input_dim")?,
            hidden_widths,
            output_dim: parse_usize("output_dim")?,
            power: parse_usize("power")? as u32,
            activation,
            residuals,
        };
        spec.validate().map_err(|e| err(values_line, &e.to_string()))?;
        let extras = parse_usize("extras")?;
        if count != spec.parameter_count() + extras {
            return Err(err(values_line, "value count does not match architecture"));
        }
        let mut values = Vec::with_capacity(count);
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| err(n, "bad number"))?;
            values.push(v);
        }
        if values.len() != count {
            return Err(err(values_line, &format!("expected {count} values, found {}", values.len())));
        }
        Ok(Checkpoint { spec, values, extras })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ParameterSet;
    use crate::rng::RngStream;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 4, 1).with_power(3);
        let p = ParameterSet::glorot(&spec, &mut RngStream::new(1)).unwrap();
        let mut values = p.flatten().into_inner();
        values.extend([2.0, 0.2, 1e-300, -0.0]);
        let ck = Checkpoint { spec, values, extras: 4 };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.spec, ck.spec);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.values), bits(&ck.values));
    }

    #[test]
    fn corrupt_value_reports_line() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 1, 1, 1, 1);
        let ck = Checkpoint { spec, values: vec![1.0, 2.0, 3.0, 4.0], extras: 0 };
        let text = ck.to_text().replace("3.0", "three");
        match Checkpoint::parse(&text, Path::new("x")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header_rejected() {
        assert!(Checkpoint::parse("kind = plain\n", Path::new("x")).is_err());
    }
}
