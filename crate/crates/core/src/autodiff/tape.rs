//! Reverse-mode accumulation over batched matrix primitives.
//!
//! Every node holds a matrix whose rows are samples. The parameters live in
//! one flat vector `θ`: the network block in [`FlatLayout`] order, optionally
//! followed by extra scalars (PDE coefficients, for instance). Replaying the
//! tape backwards visits every node once, in reverse execution order.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::network::{affine, ArchitectureSpec, FlatLayout, LayerSkip};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId {
    tape: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    /// Constant data. Its adjoint is still accumulated so input gradients
    /// can be read back.
    Input,
    /// `θ[offset..offset+len]` as a 1×len row.
    Param { offset: usize, len: usize },
    /// `θ[index]` as a 1×1 node.
    Scalar { index: usize },
    /// `x · W(layer)ᵀ + b(layer)`.
    Affine { x: usize, layer: usize },
    /// `x · W(layer)ᵀ`, no bias.
    Linear { x: usize, layer: usize },
    Tanh(usize),
    PowI(usize, u32),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    /// Matrix times a 1×1 node.
    MulScalar(usize, usize),
    /// Σ entries², a 1×1 node.
    SumSquares(usize),
    /// Mean of all entries, a 1×1 node.
    Mean(usize),
    /// Σ entries, a 1×1 node.
    Sum(usize),
}

struct Node {
    op: Op,
    value: Matrix,
    /// Whether the node depends on θ (or is an input whose adjoint is wanted).
    tracked: bool,
}

/// A single-threaded reverse-mode tape.
pub struct Tape<'a> {
    id: u64,
    theta: &'a [f64],
    layout: Option<FlatLayout>,
    weights: Vec<Matrix>,
    nodes: Vec<Node>,
}

/// Result of replaying a tape backwards from a scalar node.
pub struct TapeGradient {
    pub value: f64,
    /// `∂L/∂θ` in flat layout.
    pub params: Vector,
    adjoints: Vec<Option<Matrix>>,
    tape: u64,
}

impl TapeGradient {
    /// Adjoint of a leaf node (input, parameter slice or scalar), if it received one.
    pub fn wrt(&self, node: NodeId) -> Option<&Matrix> {
        if node.tape != self.tape {
            return None;
        }
        self.adjoints.get(node.index).and_then(Option::as_ref)
    }
}

impl<'a> Tape<'a> {
    /// A tape over a bare parameter vector, with no network layout.
    pub fn new(theta: &'a [f64]) -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            theta,
            layout: None,
            weights: Vec::new(),
            nodes: Vec::new(),
        }
    }

    /// A tape whose leading `θ` block holds the parameters of `spec`.
    pub fn for_network(spec: &ArchitectureSpec, theta: &'a [f64]) -> Result<Self> {
        spec.validate()?;
        let layout = FlatLayout::new(spec);
        if theta.len() < layout.len {
            return Err(Error::contract(format!(
                "θ has {} entries, network needs {}",
                theta.len(),
                layout.len
            )));
        }
        let weights = layout
            .shapes
            .iter()
            .zip(&layout.weight_offsets)
            .map(|(&(r, c), &off)| Matrix::from_vec(r, c, theta[off..off + r * c].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let mut tape = Tape::new(theta);
        tape.layout = Some(layout);
        tape.weights = weights;
        Ok(tape)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, node: NodeId) -> Result<&Matrix> {
        let i = self.check(node)?;
        Ok(&self.nodes[i].value)
    }

    fn check(&self, node: NodeId) -> Result<usize> {
        if node.tape != self.id || node.index >= self.nodes.len() {
            return Err(Error::contract("node does not belong to this tape"));
        }
        Ok(node.index)
    }

    fn push(&mut self, op: Op, value: Matrix, tracked: bool) -> NodeId {
        self.nodes.push(Node { op, value, tracked });
        NodeId {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn tracked(&self, i: usize) -> bool {
        self.nodes[i].tracked
    }

    fn layer(&self, layer: usize) -> Result<(&Matrix, &[f64])> {
        let layout = self
            .layout
            .as_ref()
            .ok_or_else(|| Error::contract("affine primitive on a tape without a network layout"))?;
        if layer >= layout.shapes.len() {
            return Err(Error::contract(format!("layer {layer} out of range")));
        }
        let rows = layout.shapes[layer].0;
        let off = layout.bias_offsets[layer];
        Ok((&self.weights[layer], &self.theta[off..off + rows]))
    }

    /// Constant data; `track` asks for its adjoint to be kept.
    pub fn input(&mut self, value: Matrix, track: bool) -> NodeId {
        self.push(Op::Input, value, track)
    }

    pub fn param(&mut self, offset: usize, len: usize) -> Result<NodeId> {
        if offset + len > self.theta.len() {
            return Err(Error::contract("parameter slice out of range"));
        }
        let value = Matrix::row_vector(&self.theta[offset..offset + len]);
        Ok(self.push(Op::Param { offset, len }, value, true))
    }

    pub fn scalar(&mut self, index: usize) -> Result<NodeId> {
        if index >= self.theta.len() {
            return Err(Error::contract("parameter index out of range"));
        }
        let value = Matrix::filled(1, 1, self.theta[index]);
        Ok(self.push(Op::Scalar { index }, value, true))
    }

    pub fn affine(&mut self, x: NodeId, layer: usize) -> Result<NodeId> {
        let xi = self.check(x)?;
        let (w, b) = self.layer(layer)?;
        if self.nodes[xi].value.cols() != w.cols() {
            return Err(Error::contract("affine input width mismatch"));
        }
        let value = affine(&self.nodes[xi].value, w, b);
        Ok(self.push(Op::Affine { x: xi, layer }, value, true))
    }

    pub fn linear(&mut self, x: NodeId, layer: usize) -> Result<NodeId> {
        let xi = self.check(x)?;
        let (w, _) = self.layer(layer)?;
        if self.nodes[xi].value.cols() != w.cols() {
            return Err(Error::contract("linear input width mismatch"));
        }
        let value = self.nodes[xi].value.mul_transposed(w);
        Ok(self.push(Op::Linear { x: xi, layer }, value, true))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let xi = self.check(x)?;
        let value = self.nodes[xi].value.map(f64::tanh);
        let t = self.tracked(xi);
        Ok(self.push(Op::Tanh(xi), value, t))
    }

    pub fn powi(&mut self, x: NodeId, p: u32) -> Result<NodeId> {
        let xi = self.check(x)?;
        let value = self.nodes[xi].value.map(|v| v.powi(p as i32));
        let t = self.tracked(xi);
        Ok(self.push(Op::PowI(xi, p), value, t))
    }

    fn binary(
        &mut self,
        a: NodeId,
        b: NodeId,
        make: fn(usize, usize) -> Op,
        f: fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        if self.nodes[ai].value.shape() != self.nodes[bi].value.shape() {
            return Err(Error::contract(format!(
                "element-wise shape mismatch {:?} vs {:?}",
                self.nodes[ai].value.shape(),
                self.nodes[bi].value.shape()
            )));
        }
        let value = self.nodes[ai].value.zip_map(&self.nodes[bi].value, f);
        let t = self.tracked(ai) || self.tracked(bi);
        Ok(self.push(make(ai, bi), value, t))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Mul, |x, y| x * y)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let ai = self.check(a)?;
        let value = self.nodes[ai].value.scale(c);
        let t = self.tracked(ai);
        Ok(self.push(Op::Scale(ai, c), value, t))
    }

    pub fn offset(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let ai = self.check(a)?;
        let value = self.nodes[ai].value.map(|v| v + c);
        let t = self.tracked(ai);
        Ok(self.push(Op::Offset(ai), value, t))
    }

    pub fn mul_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let (ai, si) = (self.check(a)?, self.check(s)?);
        if self.nodes[si].value.shape() != (1, 1) {
            return Err(Error::contract("mul_scalar needs a 1x1 scalar node"));
        }
        let c = self.nodes[si].value[(0, 0)];
        let value = self.nodes[ai].value.scale(c);
        let t = self.tracked(ai) || self.tracked(si);
        Ok(self.push(Op::MulScalar(ai, si), value, t))
    }

    fn reduce(&mut self, a: NodeId, make: fn(usize) -> Op, f: fn(&Matrix) -> f64) -> Result<NodeId> {
        let ai = self.check(a)?;
        let value = Matrix::filled(1, 1, f(&self.nodes[ai].value));
        let t = self.tracked(ai);
        Ok(self.push(make(ai), value, t))
    }

    pub fn sum_squares(&mut self, a: NodeId) -> Result<NodeId> {
        self.reduce(a, Op::SumSquares, |m| m.as_slice().iter().map(|v| v * v).sum())
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.reduce(a, Op::Mean, |m| {
            m.as_slice().iter().sum::<f64>() / m.as_slice().len().max(1) as f64
        })
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.reduce(a, Op::Sum, |m| m.as_slice().iter().sum())
    }

    /// Records the forward pass of `spec` for a batch `x` and returns the output node.
    pub fn network(&mut self, spec: &ArchitectureSpec, x: NodeId) -> Result<NodeId> {
        let mut cur = x;
        for l in 1..=spec.n_hidden() {
            let z = self.affine(cur, l - 1)?;
            let a = match spec.activation {
                crate::network::Activation::Tanh => self.tanh(z)?,
                crate::network::Activation::Identity => z,
            };
            cur = match spec.layer_skip(l) {
                LayerSkip::Power(p) => {
                    let s = if p == 1 { cur } else { self.powi(cur, p)? };
                    self.add(a, s)?
                }
                _ => a,
            };
        }
        self.affine(cur, spec.n_hidden())
    }

    /// Replays the tape backwards from the scalar node `loss`.
    pub fn gradient(&self, loss: NodeId) -> Result<TapeGradient> {
        let li = self.check(loss)?;
        if self.nodes[li].value.shape() != (1, 1) {
            return Err(Error::contract("gradient needs a 1x1 loss node"));
        }
        let mut grad = vec![0.0; self.theta.len()];
        let mut weight_grads: Vec<Option<Matrix>> = vec![None; self.weights.len()];
        let mut adj: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        adj.resize_with(self.nodes.len(), || None);
        adj[li] = Some(Matrix::filled(1, 1, 1.0));

        fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
            match slot {
                Some(m) => m.add_assign(&delta),
                None => *slot = Some(delta),
            }
        }

        for i in (0..=li).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                if let Op::Input = node.op {
                    adj[i] = Some(g);
                }
                continue;
            }
            // Leaf adjoints are kept for `TapeGradient::wrt`; interior ones are dropped.
            match node.op {
                Op::Input => adj[i] = Some(g),
                Op::Param { offset, len } => {
                    for (d, v) in grad[offset..offset + len].iter_mut().zip(g.as_slice()) {
                        *d += v;
                    }
                    adj[i] = Some(g);
                }
                Op::Scalar { index } => {
                    grad[index] += g[(0, 0)];
                    adj[i] = Some(g);
                }
                Op::Affine { x, layer } | Op::Linear { x, layer } => {
                    let xv = &self.nodes[x].value;
                    let wg = weight_grads[layer].get_or_insert_with(|| {
                        Matrix::zeros(self.weights[layer].rows(), self.weights[layer].cols())
                    });
                    wg.add_transposed_product(1.0, &g, xv);
                    if let Op::Affine { .. } = node.op {
                        let off = self.layout.as_ref().expect("layout").bias_offsets[layer];
                        for (d, v) in grad[off..].iter_mut().zip(g.column_sums()) {
                            *d += v;
                        }
                    }
                    if self.nodes[x].tracked {
                        accumulate(&mut adj[x], g.mul(&self.weights[layer]));
                    }
                }
                Op::Tanh(x) => {
                    let d = g.zip_map(&node.value, |gv, t| gv * (1.0 - t * t));
                    accumulate(&mut adj[x], d);
                }
                Op::PowI(x, p) => {
                    let pf = f64::from(p);
                    let d = if p == 0 {
                        Matrix::zeros(g.rows(), g.cols())
                    } else {
                        g.zip_map(&self.nodes[x].value, |gv, v| gv * pf * v.powi(p as i32 - 1))
                    };
                    accumulate(&mut adj[x], d);
                }
                Op::Add(a, b) => {
                    if self.nodes[a].tracked {
                        accumulate(&mut adj[a], g.clone());
                    }
                    if self.nodes[b].tracked {
                        accumulate(&mut adj[b], g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.nodes[b].tracked {
                        accumulate(&mut adj[b], g.scale(-1.0));
                    }
                    if self.nodes[a].tracked {
                        accumulate(&mut adj[a], g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.nodes[a].tracked {
                        accumulate(&mut adj[a], g.zip_map(&self.nodes[b].value, |x, y| x * y));
                    }
                    if self.nodes[b].tracked {
                        accumulate(&mut adj[b], g.zip_map(&self.nodes[a].value, |x, y| x * y));
                    }
                }
                Op::Scale(a, c) => accumulate(&mut adj[a], g.scale(c)),
                Op::Offset(a) => accumulate(&mut adj[a], g),
                Op::MulScalar(a, s) => {
                    let c = self.nodes[s].value[(0, 0)];
                    if self.nodes[s].tracked {
                        let ds: f64 = g
                            .as_slice()
                            .iter()
                            .zip(self.nodes[a].value.as_slice())
                            .map(|(x, y)| x * y)
                            .sum();
                        accumulate(&mut adj[s], Matrix::filled(1, 1, ds));
                    }
                    if self.nodes[a].tracked {
                        accumulate(&mut adj[a], g.scale(c));
                    }
                }
                Op::SumSquares(a) => {
                    let gv = g[(0, 0)];
                    accumulate(&mut adj[a], self.nodes[a].value.scale(2.0 * gv));
                }
                Op::Mean(a) => {
                    let v = &self.nodes[a].value;
                    let n = v.as_slice().len().max(1) as f64;
                    accumulate(&mut adj[a], Matrix::filled(v.rows(), v.cols(), g[(0, 0)] / n));
                }
                Op::Sum(a) => {
                    let v = &self.nodes[a].value;
                    accumulate(&mut adj[a], Matrix::filled(v.rows(), v.cols(), g[(0, 0)]));
                }
            }
        }

        if let Some(layout) = &self.layout {
            for (layer, wg) in weight_grads.into_iter().enumerate() {
                if let Some(wg) = wg {
                    let off = layout.weight_offsets[layer];
                    for (d, v) in grad[off..].iter_mut().zip(wg.as_slice()) {
                        *d += v;
                    }
                }
            }
        }

        Ok(TapeGradient {
            value: self.nodes[li].value[(0, 0)],
            params: grad.into(),
            adjoints: adj,
            tape: self.id,
        })
    }
}

/// Evaluates a scalar program recorded by `build` and returns its value and
/// gradient with respect to `θ`.
///
/// With `spec`, the leading block of `θ` is interpreted as that network's
/// parameters so [`Tape::affine`] and friends are available.
pub fn grad_wrt_params<F>(
    spec: Option<&ArchitectureSpec>,
    theta: &[f64],
    build: F,
) -> Result<(f64, Vector)>
where
    F: FnOnce(&mut Tape<'_>) -> Result<NodeId>,
{
    let mut tape = match spec {
        Some(s) => Tape::for_network(s, theta)?,
        None => Tape::new(theta),
    };
    let loss = build(&mut tape)?;
    let g = tape.gradient(loss)?;
    Ok((g.value, g.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{backward_batch, forward_batch, ArchitectureKind, ParameterSet};
    use crate::rng::RngStream;

    #[test]
    fn quadratic_norm() {
        let (v, g) = grad_wrt_params(None, &[1.0, 2.0], |t| {
            let p = t.param(0, 2)?;
            t.sum_squares(p)
        })
        .unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(g.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn foreign_node_is_rejected() {
        let theta = [1.0];
        let mut a = Tape::new(&theta);
        let mut b = Tape::new(&theta);
        let n = a.param(0, 1).unwrap();
        assert!(matches!(b.tanh(n), Err(Error::Contract(_))));
        assert!(b.param(1, 1).is_err());
        let z = b.input(Matrix::zeros(1, 1), false);
        assert!(b.affine(z, 0).is_err());
    }

    #[test]
    fn network_matches_hand_backprop() {
        let mut rng = RngStream::new(5);
        for kind in ArchitectureKind::ALL {
            let spec = ArchitectureSpec::uniform(kind, 2, 4, 3, 1);
            let p = ParameterSet::glorot(&spec, &mut rng).unwrap();
            let x = Matrix::from_vec(6, 2, (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
            let y = Matrix::from_vec(6, 1, (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            let theta = p.flatten();
            let (loss, g) = grad_wrt_params(Some(&spec), &theta, |t| {
                let xi = t.input(x.clone(), false);
                let yi = t.input(y.clone(), false);
                let out = t.network(&spec, xi)?;
                let r = t.sub(out, yi)?;
                let s = t.sum_squares(r)?;
                t.scale(s, 1.0 / 6.0)
            })
            .unwrap();
            let (out, cache) = forward_batch(&spec, &p, &x).unwrap();
            let up = out.zip_map(&y, |o, t| 2.0 * (o - t) / 6.0);
            let hand = backward_batch(&spec, &p, &cache, &up).unwrap();
            let mse: f64 = out.zip_map(&y, |o, t| (o - t).powi(2)).as_slice().iter().sum::<f64>() / 6.0;
            assert!((loss - mse).abs() < 1e-14);
            for (a, b) in g.iter().zip(hand.params.flatten().iter()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn input_adjoint_available() {
        let theta = [3.0];
        let mut t = Tape::new(&theta);
        let x = t.input(Matrix::filled(1, 1, 2.0), true);
        let s = t.scalar(0).unwrap();
        let y = t.mul_scalar(x, s).unwrap();
        let y2 = t.mul(y, x).unwrap();
        let l = t.sum(y2).unwrap();
        let g = t.gradient(l).unwrap();
        // L = θ x², dL/dx = 2 θ x, dL/dθ = x²
        assert_eq!(g.wrt(x).unwrap()[(0, 0)], 12.0);
        assert_eq!(g.params[0], 4.0);
    }
}
