//! Exact solution of viscous Burgers' equation with `u(x, 0) = −sin(πx)`.
//!
//! With `φ(y) = exp(−cos(πy) / (2πν))` the Cole–Hopf transform gives
//!
//! ```text
//! u(x, t) = −∫ sin(π(x − η)) φ(x − η) e^{−η²/4νt} dη / ∫ φ(x − η) e^{−η²/4νt} dη
//! ```
//!
//! and the substitution `η = √(4νt) z` turns both integrals into Gauss–Hermite
//! sums. Exponents reach ±1/(2πν) ≈ ±50 and the quadrature weights fall to
//! 1e-160, so the sums are formed in log space.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::{linspace, write_atomic};
use crate::error::{Error, Result};

/// Viscosity of the benchmark, `1/(100π)`.
pub const BENCHMARK_NU: f64 = 0.01 / PI;

/// Largest rule whose recurrence stays inside f64 range.
pub const MAX_HERMITE_NODES: usize = 300;

/// Gauss–Hermite rule for `∫ f(z) e^{−z²} dz`: nodes in ascending order and
/// the natural logarithm of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl HermiteRule {
    /// Roots bracketed by a sign-change scan of the orthonormal Hermite
    /// recurrence, then polished by Newton steps kept inside the bracket.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_HERMITE_NODES {
            return Err(Error::contract(format!(
                "Gauss-Hermite order must be in 1..={MAX_HERMITE_NODES}, got {n}"
            )));
        }
        let nf = n as f64;
        // Positive roots, then mirrored.
        let zmax = (2.0 * nf + 1.0).sqrt() + 1.0;
        // Adjacent roots are at least π / √(2n + 1) apart.
        let h = PI / (2.0 * nf + 1.0).sqrt() / 16.0;
        let mut positive = Vec::with_capacity(n / 2);
        let mut lo = 1e-3 * h;
        let mut flo = hermite_pair(n, lo).0;
        while lo < zmax {
            let hi = lo + h;
            let fhi = hermite_pair(n, hi).0;
            if flo.signum() != fhi.signum() {
                positive.push(polish(n, lo, hi));
            }
            lo = hi;
            flo = fhi;
        }
        if positive.len() != n / 2 {
            return Err(Error::contract(format!(
                "Gauss-Hermite scan found {} of {} positive roots",
                positive.len(),
                n / 2
            )));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut log_weights = Vec::with_capacity(n);
        for z in positive.iter().rev() {
            nodes.push(-z);
            log_weights.push(log_weight(n, *z));
        }
        if n % 2 == 1 {
            nodes.push(0.0);
            log_weights.push(log_weight(n, 0.0));
        }
        for z in &positive {
            nodes.push(*z);
            log_weights.push(log_weight(n, *z));
        }
        Ok(HermiteRule { nodes, log_weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Orthonormal `(p_n(z), p_{n−1}(z))` without the Gaussian factor.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (PI.powf(-0.25), 0.0);
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

fn polish(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let flo = hermite_pair(n, lo).0;
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (p, q) = hermite_pair(n, z);
        if p == 0.0 {
            return z;
        }
        if p.signum() == flo.signum() {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - p / ((2.0 * n as f64).sqrt() * q);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - z).abs() <= 1e-15 * z.abs().max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

/// `ln w = ln 2 − 2 ln |p_n'(z)| `, with `p_n' = √(2n) p_{n−1}` at a root.
fn log_weight(n: usize, z: f64) -> f64 {
    let pp = (2.0 * n as f64).sqrt() * hermite_pair(n, z).1;
    2.0f64.ln() - 2.0 * pp.abs().ln()
}

/// Cole–Hopf evaluator with a fixed quadrature rule.
#[derive(Debug, Clone)]
pub struct ColeHopf {
    pub nu: f64,
    rule: HermiteRule,
}

impl ColeHopf {
    pub fn new(nu: f64, nodes: usize) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::contract("viscosity must be positive"));
        }
        Ok(ColeHopf {
            nu,
            rule: HermiteRule::new(nodes)?,
        })
    }

    /// `u(x, t)`. At `t = 0` the initial condition is returned exactly.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !x.is_finite() || !t.is_finite() {
            return Err(Error::Domain(format!("reference solution needs finite x and t >= 0, got ({x}, {t})")));
        }
        if t == 0.0 {
            return Ok(-(PI * x).sin());
        }
        let c = (4.0 * self.nu * t).sqrt();
        let k = 1.0 / (2.0 * PI * self.nu);
        let exps: Vec<f64> = self
            .rule
            .nodes
            .iter()
            .zip(&self.rule.log_weights)
            .map(|(z, lw)| lw - k * (PI * (x - c * z)).cos())
            .collect();
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (z, e) in self.rule.nodes.iter().zip(&exps) {
            let w = (e - m).exp();
            num += w * (PI * (x - c * z)).sin();
            den += w;
        }
        Ok(-num / den)
    }
}

/// Reference solution at the benchmark viscosity with a 100-node rule.
pub fn cole_hopf_reference(x: f64, t: f64, nu: f64) -> Result<f64> {
    ColeHopf::new(nu, 100)?.eval(x, t)
}

/// Reference values on a tensor grid: `nx` points over `[−1, 1]`, `nt` over `[0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    /// Rows of `(x, t, u)`.
    pub points: Vec<[f64; 3]>,
}

impl ReferenceGrid {
    pub fn generate(nx: usize, nt: usize, t_max: f64, nu: f64, nodes: usize) -> Result<Self> {
        if nx < 2 || nt < 2 {
            return Err(Error::contract("reference grid needs at least 2 points per axis"));
        }
        if !(t_max > 0.0 && t_max <= 1.0) {
            return Err(Error::contract("t_max must be in (0, 1]"));
        }
        let ch = ColeHopf::new(nu, nodes)?;
        let mut points = Vec::with_capacity(nx * nt);
        for t in linspace(0.0, t_max, nt) {
            for x in linspace(-1.0, 1.0, nx) {
                points.push([x, t, ch.eval(x, t)?]);
            }
        }
        Ok(ReferenceGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,t,u\n");
        for [x, t, u] in &self.points {
            let _ = writeln!(s, "{x:?},{t:?},{u:?}");
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses `x,t,u` CSV and checks every point lies in `[−1, 1] × [0, 1]`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.split(',').map(str::trim).eq(["x", "t", "u"]) => {}
            _ => return Err(Error::parse(path, 1, "expected header x,t,u")),
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            let no = i + 1;
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::parse(path, no, format!("expected 3 fields, got {}", f.len())));
            }
            let mut row = [0.0f64; 3];
            for (v, (s, name)) in row.iter_mut().zip(f.iter().zip(["x", "t", "u"])) {
                *v = s
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, no, format!("{name}: '{s}' is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::parse(path, no, format!("{name}: non-finite value")));
                }
            }
            if !(-1.0..=1.0).contains(&row[0]) || !(0.0..=1.0).contains(&row[1]) {
                return Err(Error::parse(
                    path,
                    no,
                    format!("point ({}, {}) outside [-1, 1] x [0, 1]", row[0], row[1]),
                ));
            }
            points.push(row);
        }
        if points.is_empty() {
            return Err(Error::parse(path, 1, "reference grid has no rows"));
        }
        Ok(ReferenceGrid { points })
    }
}
