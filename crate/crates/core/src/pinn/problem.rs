use crate::autodiff::{jet_forward, NodeId, Tape};
use crate::data::{latin_hypercube, Domain};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Activation, ArchitectureSpec, LayerSkip, ParameterSet};
use crate::rng::RngStream;

use super::reference::ReferenceGrid;

/// Convection and viscosity coefficients of `u_t + λ1 u u_x − λ2 u_xx = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LambdaPair {
    pub const fn new(lambda1: f64, lambda2: f64) -> Self {
        LambdaPair { lambda1, lambda2 }
    }

    /// `(1, 1/(100π))`, rounded as in the benchmark: `λ2 = 0.003183`.
    pub const TRUTH: LambdaPair = LambdaPair::new(1.0, 0.003183);
    /// Starting guess of the benchmark.
    pub const INITIAL: LambdaPair = LambdaPair::new(2.0, 0.2);

    /// Percentage errors `100 |λ − λ*| / |λ*|` for both coefficients.
    pub fn percent_errors(&self, truth: &LambdaPair) -> (f64, f64) {
        (
            100.0 * (self.lambda1 - truth.lambda1).abs() / truth.lambda1.abs(),
            100.0 * (self.lambda2 - truth.lambda2).abs() / truth.lambda2.abs(),
        )
    }
}

/// `g = N_t + λ1 N N_x − λ2 N_xx` at one point, inputs ordered `(x, t)`.
pub fn residual_g(spec: &ArchitectureSpec, params: &ParameterSet, lambda: LambdaPair, x: f64, t: f64) -> Result<f64> {
    let j = jet_forward(spec, params, &[x, t], [0, 1])?;
    Ok(j.d1[1] + lambda.lambda1 * j.value * j.d1[0] - lambda.lambda2 * j.d2)
}

/// Observations, collocation points and the network for the inverse problem.
///
/// The optimizer sees one flat vector: the network parameters in
/// [`crate::network::FlatLayout`] order followed by `λ1`, `λ2`.
#[derive(Debug, Clone)]
pub struct BurgersInverseProblem {
    pub spec: ArchitectureSpec,
    /// `n × 2` rows of `(x, t)`.
    pub observation_inputs: Matrix,
    pub observation_values: Vec<f64>,
    /// `n_c × 2` rows of `(x, t)`.
    pub collocation: Matrix,
    pub lambda_init: LambdaPair,
    /// Collocation points per tape; bounds memory, not results.
    pub chunk_size: usize,
}

fn check_domain(m: &Matrix, what: &str) -> Result<()> {
    if m.cols() != 2 || m.rows() == 0 {
        return Err(Error::contract(format!("{what} must be a non-empty n x 2 matrix")));
    }
    for i in 0..m.rows() {
        let (x, t) = (m[(i, 0)], m[(i, 1)]);
        if !((-1.0..=1.0).contains(&x) && (0.0..=1.0).contains(&t)) {
            return Err(Error::Domain(format!("{what} row {i}: ({x}, {t}) outside [-1, 1] x [0, 1]")));
        }
    }
    Ok(())
}

impl BurgersInverseProblem {
    pub fn new(
        spec: ArchitectureSpec,
        observation_inputs: Matrix,
        observation_values: Vec<f64>,
        collocation: Matrix,
        lambda_init: LambdaPair,
    ) -> Result<Self> {
        spec.validate()?;
        if spec.input_dim != 2 || spec.output_dim != 1 {
            return Err(Error::contract("Burgers network must map (x, t) to a scalar"));
        }
        check_domain(&observation_inputs, "observations")?;
        check_domain(&collocation, "collocation points")?;
        if observation_inputs.rows() != observation_values.len() {
            return Err(Error::contract("observation count mismatch"));
        }
        if observation_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite observation".into()));
        }
        Ok(BurgersInverseProblem {
            spec,
            observation_inputs,
            observation_values,
            collocation,
            lambda_init,
            chunk_size: 512,
        })
    }

    /// Draws `n_obs` distinct grid points uniformly and `n_collocation`
    /// Latin-hypercube points over `[−1, 1] × [0, 1]`.
    pub fn from_reference(
        spec: ArchitectureSpec,
        grid: &ReferenceGrid,
        n_obs: usize,
        n_collocation: usize,
        lambda_init: LambdaPair,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if n_obs == 0 || n_obs > grid.len() {
            return Err(Error::contract(format!(
                "need 1..={} observations, got {n_obs}",
                grid.len()
            )));
        }
        let mut obs_rng = rng.child(1);
        let mut idx: Vec<usize> = (0..grid.len()).collect();
        obs_rng.shuffle(&mut idx);
        idx.truncate(n_obs);
        idx.sort_unstable();
        let mut inputs = Vec::with_capacity(2 * n_obs);
        let mut values = Vec::with_capacity(n_obs);
        for &i in &idx {
            let [x, t, u] = grid.points[i];
            inputs.extend_from_slice(&[x, t]);
            values.push(u);
        }
        let domain = Domain::new(vec![(-1.0, 1.0), (0.0, 1.0)])?;
        let collocation = latin_hypercube(&domain, n_collocation, &mut rng.child(2))?;
        Self::new(spec, Matrix::from_vec(n_obs, 2, inputs)?, values, collocation, lambda_init)
    }

    pub fn n_params(&self) -> usize {
        self.spec.parameter_count()
    }

    /// Network parameters followed by the initial `λ1, λ2`.
    pub fn initial_theta(&self, params: &ParameterSet) -> Result<Vec<f64>> {
        params.check_shapes(&self.spec)?;
        let mut v = params.flatten().into_inner();
        v.push(self.lambda_init.lambda1);
        v.push(self.lambda_init.lambda2);
        Ok(v)
    }

    /// Splits a full vector into network parameters and `λ`.
    pub fn split_theta(&self, theta: &[f64]) -> Result<(ParameterSet, LambdaPair)> {
        let p = self.n_params();
        if theta.len() != p + 2 {
            return Err(Error::contract(format!("expected {} values, got {}", p + 2, theta.len())));
        }
        Ok((
            ParameterSet::unflatten(&theta[..p], &self.spec)?,
            LambdaPair::new(theta[p], theta[p + 1]),
        ))
    }
}

/// Loss components and the gradient over `[θ; λ1; λ2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnLoss {
    pub loss: f64,
    pub mse_u: f64,
    pub mse_g: f64,
    pub grad: Vec<f64>,
}

/// Tape nodes for `N`, `N_x`, `N_t`, `N_xx` over a batch.
pub struct JetNodes {
    pub value: NodeId,
    pub dx: NodeId,
    pub dt: NodeId,
    pub dxx: NodeId,
}

/// Element-wise `f(v)`, `f'(v)·v_x`, `f'(v)·v_t`, `f'(v)·v_xx + f''(v)·v_x²`
/// given nodes for `f(v)`, `f'(v)`, `f''(v)`.
fn chain(tape: &mut Tape<'_>, f: NodeId, d1: NodeId, d2: NodeId, v: &JetNodes) -> Result<JetNodes> {
    let dx = tape.mul(d1, v.dx)?;
    let dt = tape.mul(d1, v.dt)?;
    let a = tape.mul(d1, v.dxx)?;
    let sq = tape.powi(v.dx, 2)?;
    let b = tape.mul(d2, sq)?;
    let dxx = tape.add(a, b)?;
    Ok(JetNodes { value: f, dx, dt, dxx })
}

/// Records the second-order input jet of the network for the `(x, t)` rows
/// of `inputs`. Directions: `x` is column 0, `t` column 1.
pub fn record_jets(tape: &mut Tape<'_>, spec: &ArchitectureSpec, inputs: &Matrix) -> Result<JetNodes> {
    let n = inputs.rows();
    let mut ex = Matrix::zeros(n, 2);
    let mut et = Matrix::zeros(n, 2);
    for i in 0..n {
        ex[(i, 0)] = 1.0;
        et[(i, 1)] = 1.0;
    }
    let mut cur = JetNodes {
        value: tape.input(inputs.clone(), false),
        dx: tape.input(ex, false),
        dt: tape.input(et, false),
        dxx: tape.input(Matrix::zeros(n, 2), false),
    };
    for l in 1..=spec.n_hidden() {
        let z = JetNodes {
            value: tape.affine(cur.value, l - 1)?,
            dx: tape.linear(cur.dx, l - 1)?,
            dt: tape.linear(cur.dt, l - 1)?,
            dxx: tape.linear(cur.dxx, l - 1)?,
        };
        let a = match spec.activation {
            Activation::Tanh => {
                let a = tape.tanh(z.value)?;
                // σ' = 1 − a², σ'' = −2 a σ'
                let a2 = tape.powi(a, 2)?;
                let neg = tape.scale(a2, -1.0)?;
                let s1 = tape.offset(neg, 1.0)?;
                let prod = tape.mul(a, s1)?;
                let s2 = tape.scale(prod, -2.0)?;
                chain(tape, a, s1, s2, &z)?
            }
            Activation::Identity => z,
        };
        cur = match spec.layer_skip(l) {
            LayerSkip::Power(1) => JetNodes {
                value: tape.add(a.value, cur.value)?,
                dx: tape.add(a.dx, cur.dx)?,
                dt: tape.add(a.dt, cur.dt)?,
                dxx: tape.add(a.dxx, cur.dxx)?,
            },
            LayerSkip::Power(p) => {
                // (v^p)' = p v^{p−1}, (v^p)'' = p (p−1) v^{p−2}
                let pf = f64::from(p);
                let vp = tape.powi(cur.value, p)?;
                let vp1 = tape.powi(cur.value, p - 1)?;
                let d1 = tape.scale(vp1, pf)?;
                let d2 = if p == 2 {
                    let (r, c) = tape.value(cur.value)?.shape();
                    tape.input(Matrix::filled(r, c, 2.0), false)
                } else {
                    let vp2 = tape.powi(cur.value, p - 2)?;
                    tape.scale(vp2, pf * (pf - 1.0))?
                };
                let s = chain(tape, vp, d1, d2, &cur)?;
                JetNodes {
                    value: tape.add(a.value, s.value)?,
                    dx: tape.add(a.dx, s.dx)?,
                    dt: tape.add(a.dt, s.dt)?,
                    dxx: tape.add(a.dxx, s.dxx)?,
                }
            }
            LayerSkip::None | LayerSkip::WidthMismatch => a,
        };
    }
    let last = spec.n_hidden();
    Ok(JetNodes {
        value: tape.affine(cur.value, last)?,
        dx: tape.linear(cur.dx, last)?,
        dt: tape.linear(cur.dt, last)?,
        dxx: tape.linear(cur.dxx, last)?,
    })
}

fn rows(m: &Matrix, start: usize, end: usize) -> Matrix {
    let c = m.cols();
    Matrix::from_vec(end - start, c, m.as_slice()[start * c..end * c].to_vec()).expect("row block")
}

/// Residuals `g` at the collocation points, batched on a tape.
pub fn collocation_residuals(problem: &BurgersInverseProblem, theta: &[f64]) -> Result<Vec<f64>> {
    let p = problem.n_params();
    if theta.len() != p + 2 {
        return Err(Error::contract("θ must hold the network parameters plus λ1, λ2"));
    }
    let mut out = Vec::with_capacity(problem.collocation.rows());
    let n_c = problem.collocation.rows();
    let chunk = problem.chunk_size.max(1);
    let mut start = 0;
    while start < n_c {
        let end = (start + chunk).min(n_c);
        let mut tape = Tape::for_network(&problem.spec, theta)?;
        let g = residual_node(&mut tape, problem, &rows(&problem.collocation, start, end))?;
        out.extend_from_slice(tape.value(g)?.as_slice());
        start = end;
    }
    Ok(out)
}

fn residual_node(tape: &mut Tape<'_>, problem: &BurgersInverseProblem, inputs: &Matrix) -> Result<NodeId> {
    let p = problem.n_params();
    let jets = record_jets(tape, &problem.spec, inputs)?;
    let l1 = tape.scalar(p)?;
    let l2 = tape.scalar(p + 1)?;
    let nnx = tape.mul(jets.value, jets.dx)?;
    let conv = tape.mul_scalar(nnx, l1)?;
    let visc = tape.mul_scalar(jets.dxx, l2)?;
    let s = tape.add(jets.dt, conv)?;
    tape.sub(s, visc)
}

/// `MSE_u + MSE_g` and its gradient, without rejecting non-finite values.
pub(crate) fn pinn_loss_raw(problem: &BurgersInverseProblem, theta: &[f64]) -> Result<PinnLoss> {
    let p = problem.n_params();
    if theta.len() != p + 2 {
        return Err(Error::contract(format!("expected {} values, got {}", p + 2, theta.len())));
    }
    let mut grad = vec![0.0; p + 2];
    let add = |grad: &mut Vec<f64>, g: &[f64]| {
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    };

    let n = problem.observation_inputs.rows();
    let mse_u = {
        let mut tape = Tape::for_network(&problem.spec, theta)?;
        let x = tape.input(problem.observation_inputs.clone(), false);
        let out = tape.network(&problem.spec, x)?;
        let u = tape.input(Matrix::from_vec(n, 1, problem.observation_values.clone())?, false);
        let diff = tape.sub(out, u)?;
        let ss = tape.sum_squares(diff)?;
        let loss = tape.scale(ss, 1.0 / n as f64)?;
        let g = tape.gradient(loss)?;
        add(&mut grad, &g.params);
        g.value
    };

    let n_c = problem.collocation.rows();
    let chunk = problem.chunk_size.max(1);
    let mut mse_g = 0.0;
    let mut start = 0;
    while start < n_c {
        let end = (start + chunk).min(n_c);
        let mut tape = Tape::for_network(&problem.spec, theta)?;
        let g = residual_node(&mut tape, problem, &rows(&problem.collocation, start, end))?;
        let ss = tape.sum_squares(g)?;
        let loss = tape.scale(ss, 1.0 / n_c as f64)?;
        let gr = tape.gradient(loss)?;
        add(&mut grad, &gr.params);
        mse_g += gr.value;
        start = end;
    }

    Ok(PinnLoss {
        loss: mse_u + mse_g,
        mse_u,
        mse_g,
        grad,
    })
}

/// Data misfit plus PDE residual, with the gradient over `[θ; λ1; λ2]`
/// obtained by reverse-mode differentiation through the input jets.
pub fn pinn_loss(problem: &BurgersInverseProblem, theta: &[f64]) -> Result<PinnLoss> {
    let l = pinn_loss_raw(problem, theta)?;
    if !l.loss.is_finite() || l.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "PINN loss is not finite (MSE_u = {}, MSE_g = {})",
            l.mse_u, l.mse_g
        )));
    }
    Ok(l)
}

/// The loss as an optimizer objective. Non-finite values are passed through
/// so the optimizer can back off or report them.
pub fn pinn_objective(problem: &BurgersInverseProblem) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + '_ {
    move |theta: &[f64]| pinn_loss_raw(problem, theta).map(|l| (l.loss, l.grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{central_gradient, finite_difference_check};
    use crate::network::{predict, ArchitectureKind, Layer};
    use crate::linalg::Vector;

    fn small_problem(kind: ArchitectureKind, n_c: usize, seed: u64) -> (BurgersInverseProblem, Vec<f64>) {
        let spec = ArchitectureSpec::uniform(kind, 2, 3, 4, 1);
        let mut rng = RngStream::new(seed);
        let domain = Domain::new(vec![(-1.0, 1.0), (0.0, 1.0)]).unwrap();
        let obs = latin_hypercube(&domain, 7, &mut rng).unwrap();
        let vals = (0..7).map(|i| -(std::f64::consts::PI * obs[(i, 0)]).sin()).collect();
        let col = latin_hypercube(&domain, n_c, &mut rng).unwrap();
        let mut prob = BurgersInverseProblem::new(spec.clone(), obs, vals, col, LambdaPair::new(0.7, 0.05)).unwrap();
        prob.chunk_size = 6;
        let params = ParameterSet::glorot(&spec, &mut rng).unwrap();
        let theta = prob.initial_theta(&params).unwrap();
        (prob, theta)
    }

    /// A 2→1→1 identity network whose output is `a x + b t + c`.
    fn linear_net(a: f64, b: f64, c: f64) -> (ArchitectureSpec, ParameterSet) {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 1, 1).with_activation(Activation::Identity);
        let params = ParameterSet {
            layers: vec![
                Layer {
                    weight: Matrix::from_rows(&[vec![a, b]]).unwrap(),
                    bias: Vector::from(vec![c]),
                },
                Layer {
                    weight: Matrix::from_rows(&[vec![1.0]]).unwrap(),
                    bias: Vector::from(vec![0.0]),
                },
            ],
        };
        (spec, params)
    }

    #[test]
    fn zero_network_has_zero_residual() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 4, 5, 1);
        let p = ParameterSet::zeros(&spec);
        for lam in [LambdaPair::INITIAL, LambdaPair::new(-3.0, 7.0)] {
            assert_eq!(residual_g(&spec, &p, lam, 0.3, 0.4).unwrap(), 0.0);
        }
    }

    /// `N(x, t) = x·t` as `((x + t)² − (x − t)²) / 4`: the first layer is
    /// wider than the input (no skip), the third squares through its skip.
    fn product_net() -> (ArchitectureSpec, ParameterSet) {
        let spec = ArchitectureSpec {
            hidden_widths: vec![3, 2, 2],
            ..ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 2, 1)
        }
        .with_activation(Activation::Identity);
        let layer = |w: Vec<Vec<f64>>| Layer {
            bias: Vector::zeros(w.len()),
            weight: Matrix::from_rows(&w).unwrap(),
        };
        let params = ParameterSet {
            layers: vec![
                layer(vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![0.0, 0.0]]),
                layer(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]),
                layer(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
                layer(vec![vec![0.25, -0.25]]),
            ],
        };
        (spec, params)
    }

    #[test]
    fn product_network_residual() {
        let (spec, params) = product_net();
        let lam = LambdaPair::new(1.3, 0.7);
        for (x, t) in [(0.2, 0.1), (-0.9, 0.8), (0.5, 0.5)] {
            let n = predict(&spec, &params, &Matrix::row_vector(&[x, t])).unwrap()[(0, 0)];
            assert!((n - x * t).abs() < 1e-15);
            let g = residual_g(&spec, &params, lam, x, t).unwrap();
            assert!((g - (x + 1.3 * x * t * t)).abs() < 1e-14, "{g}");
        }
        let col = Matrix::from_rows(&[vec![0.2, 0.1], vec![-0.9, 0.8]]).unwrap();
        let prob = BurgersInverseProblem::new(spec, col.clone(), vec![0.0; 2], col, lam).unwrap();
        let theta = prob.initial_theta(&params).unwrap();
        let g = collocation_residuals(&prob, &theta).unwrap();
        assert!((g[1] - (-0.9 + 1.3 * -0.9 * 0.64)).abs() < 1e-14);
    }

    #[test]
    fn linear_network_residual() {
        // N = a x + b t + c ⇒ g = b + λ1 N a.
        let (spec, params) = linear_net(0.5, -2.0, 0.25);
        let lam = LambdaPair::new(1.3, 0.7);
        let (x, t) = (0.2, 0.1);
        let n = 0.5 * x - 2.0 * t + 0.25;
        let g = residual_g(&spec, &params, lam, x, t).unwrap();
        assert!((g - (-2.0 + 1.3 * n * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn residual_matches_finite_differences() {
        let mut rng = RngStream::new(21);
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 6, 1);
        let params = ParameterSet::glorot(&spec, &mut rng).unwrap();
        let lam = LambdaPair::new(0.9, 0.1);
        let n = |x: f64, t: f64| predict(&spec, &params, &Matrix::row_vector(&[x, t])).unwrap()[(0, 0)];
        for _ in 0..5 {
            let (x, t) = (rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0));
            let h = 1e-4;
            let nx = (n(x + h, t) - n(x - h, t)) / (2.0 * h);
            let nt = (n(x, t + h) - n(x, t - h)) / (2.0 * h);
            let nxx = (n(x + h, t) - 2.0 * n(x, t) + n(x - h, t)) / (h * h);
            let fd = nt + lam.lambda1 * n(x, t) * nx - lam.lambda2 * nxx;
            let g = residual_g(&spec, &params, lam, x, t).unwrap();
            assert!((g - fd).abs() / g.abs().max(1.0) < 1e-5, "{g} vs {fd}");
        }
    }

    #[test]
    fn residual_is_linear_in_lambda() {
        let (prob, theta) = small_problem(ArchitectureKind::SqrSkipResNet, 5, 3);
        let (params, _) = prob.split_theta(&theta).unwrap();
        let g = |l1, l2| residual_g(&prob.spec, &params, LambdaPair::new(l1, l2), 0.3, 0.6).unwrap();
        let (a, b) = ((0.7, -0.2), (1.9, 0.4));
        let lhs = g(a.0 + b.0, a.1 + b.1) - g(a.0, a.1) - g(b.0, b.1) + g(0.0, 0.0);
        assert!(lhs.abs() < 1e-12, "{lhs}");
    }

    #[test]
    fn tape_residuals_match_pointwise_jets() {
        for kind in ArchitectureKind::ALL {
            let (prob, theta) = small_problem(kind, 13, 4);
            let (params, lam) = prob.split_theta(&theta).unwrap();
            let batched = collocation_residuals(&prob, &theta).unwrap();
            for (i, g) in batched.iter().enumerate() {
                let r = residual_g(&prob.spec, &params, lam, prob.collocation[(i, 0)], prob.collocation[(i, 1)]).unwrap();
                assert!((g - r).abs() < 1e-12 * r.abs().max(1.0), "{kind} {i}: {g} vs {r}");
            }
        }
    }

    #[test]
    fn cubic_power_skip_matches_jets() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::SqrSkipResNet, 2, 3, 4, 1).with_power(3);
        let mut rng = RngStream::new(9);
        let params = ParameterSet::glorot(&spec, &mut rng).unwrap();
        let col = Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.5, 0.9]]).unwrap();
        let prob = BurgersInverseProblem::new(spec.clone(), col.clone(), vec![0.0, 0.0], col, LambdaPair::new(1.1, 0.3)).unwrap();
        let theta = prob.initial_theta(&params).unwrap();
        let batched = collocation_residuals(&prob, &theta).unwrap();
        for (i, g) in batched.iter().enumerate() {
            let r = residual_g(&spec, &params, prob.lambda_init, prob.collocation[(i, 0)], prob.collocation[(i, 1)]).unwrap();
            assert!((g - r).abs() < 1e-12 * r.abs().max(1.0));
        }
    }

    #[test]
    fn zero_network_zero_data_zero_loss() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 2, 3, 1);
        let pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let prob = BurgersInverseProblem::new(spec.clone(), pts.clone(), vec![0.0, 0.0], pts, LambdaPair::INITIAL).unwrap();
        let theta = prob.initial_theta(&ParameterSet::zeros(&spec)).unwrap();
        let l = pinn_loss(&prob, &theta).unwrap();
        assert_eq!(l.loss, 0.0);
    }

    #[test]
    fn components_sum_to_total() {
        let (prob, theta) = small_problem(ArchitectureKind::ResNet, 20, 5);
        let l = pinn_loss(&prob, &theta).unwrap();
        assert!((l.loss - (l.mse_u + l.mse_g)).abs() <= 1e-12 * l.loss);
        let (params, lam) = prob.split_theta(&theta).unwrap();
        let mse_g: f64 = (0..20)
            .map(|i| residual_g(&prob.spec, &params, lam, prob.collocation[(i, 0)], prob.collocation[(i, 1)]).unwrap().powi(2))
            .sum::<f64>()
            / 20.0;
        assert!((mse_g - l.mse_g).abs() <= 1e-12 * mse_g.max(1e-300));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for kind in ArchitectureKind::ALL {
            let (prob, theta) = small_problem(kind, 20, 6);
            let rep = finite_difference_check(
                |t: &[f64]| {
                    let l = pinn_loss(&prob, t).unwrap();
                    (l.loss, l.grad)
                },
                &theta,
                1e-5,
            )
            .unwrap();
            assert!(rep.max_discrepancy < 1e-6, "{kind}: {rep:?}");
        }
    }

    #[test]
    fn lambda_gradient_has_closed_form() {
        let (prob, theta) = small_problem(ArchitectureKind::SqrSkipResNet, 20, 7);
        let l = pinn_loss(&prob, &theta).unwrap();
        let (params, lam) = prob.split_theta(&theta).unwrap();
        let n_c = 20.0;
        let (mut d1, mut d2) = (0.0, 0.0);
        for i in 0..20 {
            let (x, t) = (prob.collocation[(i, 0)], prob.collocation[(i, 1)]);
            let j = jet_forward(&prob.spec, &params, &[x, t], [0, 1]).unwrap();
            let g = j.d1[1] + lam.lambda1 * j.value * j.d1[0] - lam.lambda2 * j.d2;
            d1 += 2.0 / n_c * g * j.value * j.d1[0];
            d2 -= 2.0 / n_c * g * j.d2;
        }
        let p = prob.n_params();
        assert!((l.grad[p] - d1).abs() < 1e-12 * d1.abs().max(1.0));
        assert!((l.grad[p + 1] - d2).abs() < 1e-12 * d2.abs().max(1.0));
        let fd = central_gradient(|t| pinn_loss(&prob, t).unwrap().loss, &theta, 1e-6).unwrap();
        assert!((fd[p] - d1).abs() < 1e-6 * d1.abs().max(1.0));
    }

    #[test]
    fn chunking_does_not_change_results_beyond_rounding() {
        let (mut prob, theta) = small_problem(ArchitectureKind::SqrSkipResNet, 30, 8);
        let a = pinn_loss(&prob, &theta).unwrap();
        prob.chunk_size = 1000;
        let b = pinn_loss(&prob, &theta).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-14 * a.loss);
        let again = {
            prob.chunk_size = 6;
            pinn_loss(&prob, &theta).unwrap()
        };
        assert_eq!(a, again);
    }

    #[test]
    fn domain_is_enforced() {
        let spec = ArchitectureSpec::uniform(ArchitectureKind::Plain, 2, 1, 2, 1);
        let ok = Matrix::from_rows(&[vec![0.0, 0.5]]).unwrap();
        let bad = Matrix::from_rows(&[vec![0.0, 1.5]]).unwrap();
        assert!(BurgersInverseProblem::new(spec.clone(), bad.clone(), vec![0.0], ok.clone(), LambdaPair::INITIAL).is_err());
        assert!(BurgersInverseProblem::new(spec, ok, vec![0.0], bad, LambdaPair::INITIAL).is_err());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let (prob, mut theta) = small_problem(ArchitectureKind::Plain, 5, 9);
        let p = prob.n_params();
        theta[p] = f64::NAN;
        assert!(matches!(pinn_loss(&prob, &theta), Err(Error::NonFinite(_))));
    }
}
