//! Matrix-free curvature products.
//!
//! The prediction map `F(x) = (ĝ(u,i))_{(u,i)∈E}` composed with the convex
//! loss `½‖g − F‖²` gives the Gauss-Newton matrix `N = J_Fᵀ J_F`. Products
//! with `N` are formed in two passes: a forward pass producing one
//! directional derivative `q(u,i) = (J_F p)(u,i)` per edge, then a per-node
//! gather `ω[u,c] = Σ_{i∈E(u)} ∂ĝ(u,i)/∂x[u,c] · q(u,i)`. Neither pass
//! materializes any matrix, and the gather writes only the row it owns, so
//! it parallelizes over nodes without contention.
//!
//! The regularizer adds the diagonal `λ φ'(x[u,c]) φ(x[u,c]) |E(u)|` and
//! damping adds `μ I`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Activations, Exec, ParamVector, Problem};
use crate::network::SymmetricSparseNetwork;

/// Largest operator side [`explicit_gn_matrix`] will assemble.
pub const EXPLICIT_MATRIX_LIMIT: usize = 200;

/// Which diagonal the regularizer contributes to the curvature operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegularizationCurvature {
    /// `λ φ' φ |E(u)|`, the Gauss-Newton style positive diagonal.
    #[default]
    GaussNewton,
    /// `λ |E(u)| (φ'² + φ φ'')`, the exact second derivative of `½λφ²`;
    /// may be negative where `φ > 2/3`.
    Exact,
}

/// Damped, regularized Gauss-Newton operator linearized at a fixed point `x`.
#[derive(Debug, Clone)]
pub struct GaussNewtonOperator<'a> {
    train: &'a SymmetricSparseNetwork,
    act: Activations,
    reg_diag: Vec<f64>,
    mu: f64,
    exec: Exec,
}

impl<'a> GaussNewtonOperator<'a> {
    pub fn new(
        problem: &Problem<'a>,
        x: &ParamVector,
        mu: f64,
        reg: RegularizationCurvature,
    ) -> Result<Self> {
        problem.check(x)?;
        let act = Activations::new(x, problem.exec);
        Ok(Self::from_activations(problem, act, mu, reg))
    }

    pub(crate) fn from_activations(
        problem: &Problem<'a>,
        act: Activations,
        mu: f64,
        reg: RegularizationCurvature,
    ) -> Self {
        let d = act.d;
        let train = problem.train;
        let lambda = problem.lambda;
        let mut reg_diag = vec![0.0; act.phi.len()];
        if lambda != 0.0 {
            problem.exec.fill(&mut reg_diag, |k| {
                let deg = train.degree(k / d) as f64;
                let (phi, dphi) = (act.phi[k], act.dphi[k]);
                match reg {
                    RegularizationCurvature::GaussNewton => lambda * dphi * phi * deg,
                    RegularizationCurvature::Exact => {
                        let ddphi = dphi * (1.0 - 2.0 * phi);
                        lambda * deg * (dphi * dphi + phi * ddphi)
                    }
                }
            });
        }
        Self {
            train,
            act,
            reg_diag,
            mu,
            exec: problem.exec,
        }
    }

    pub fn dim(&self) -> usize {
        self.act.phi.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn set_mu(&mut self, mu: f64) {
        self.mu = mu;
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                actual: p.len(),
            });
        }
        Ok(())
    }

    /// Per-edge tangent `q = J_F p`, in edge order.
    pub fn jacobian_vector_product(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        let d = self.act.d;
        let edges = self.train.edges();
        let act = &self.act;
        let mut q = vec![0.0; edges.len()];
        self.exec.fill(&mut q, |k| {
            let (u, i) = (edges[k].u, edges[k].i);
            let (pu, pi) = (&p[u * d..(u + 1) * d], &p[i * d..(i + 1) * d]);
            let (fu, fi) = (act.phi_row(u), act.phi_row(i));
            let (du, di) = (act.dphi_row(u), act.dphi_row(i));
            let mut acc = du[0] * pu[0] + di[0] * pi[0];
            for c in 1..d {
                acc += du[c] * pu[c] * fi[c] + fu[c] * di[c] * pi[c];
            }
            acc
        });
        Ok(q)
    }

    /// `ω_N = J_Fᵀ J_F p` written into `out`.
    pub fn gn_product_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let q = self.jacobian_vector_product(p)?;
        self.check(out)?;
        let d = self.act.d;
        let act = &self.act;
        let train = self.train;
        self.exec.for_each_row(out, d, |u, row| {
            row.fill(0.0);
            for nb in train.neighbors(u) {
                let qe = q[nb.edge];
                row[0] += qe;
                let partner = act.phi_row(nb.node);
                for c in 1..d {
                    row[c] += partner[c] * qe;
                }
            }
            let dphi = act.dphi_row(u);
            for c in 0..d {
                row[c] *= dphi[c];
            }
        });
        Ok(())
    }

    /// `ω_Z = ω_N + diag(reg) p` written into `out`.
    pub fn regularized_product_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        self.gn_product_into(p, out)?;
        for ((o, r), pk) in out.iter_mut().zip(&self.reg_diag).zip(p) {
            *o += r * pk;
        }
        Ok(())
    }

    /// `ω_D = ω_Z + μ p` written into `out`.
    pub fn damped_product_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        self.regularized_product_into(p, out)?;
        for (o, pk) in out.iter_mut().zip(p) {
            *o += self.mu * pk;
        }
        Ok(())
    }

    pub fn damped_product(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.damped_product_into(p, &mut out)?;
        Ok(out)
    }
}

fn check_lengths(x: &ParamVector, p: &[f64]) -> Result<()> {
    if x.len() != p.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: p.len(),
        });
    }
    Ok(())
}

fn operator<'a>(
    x: &ParamVector,
    train: &'a SymmetricSparseNetwork,
    lambda: f64,
    mu: f64,
) -> Result<GaussNewtonOperator<'a>> {
    GaussNewtonOperator::new(
        &Problem::new(train, lambda),
        x,
        mu,
        RegularizationCurvature::GaussNewton,
    )
}

/// Directional derivative of every training prediction along `p`.
pub fn jacobian_vector_product(
    x: &ParamVector,
    p: &[f64],
    train: &SymmetricSparseNetwork,
) -> Result<Vec<f64>> {
    check_lengths(x, p)?;
    operator(x, train, 0.0, 0.0)?.jacobian_vector_product(p)
}

/// Gauss-Newton product `J_Fᵀ J_F p`.
pub fn gn_vector_product(
    x: &ParamVector,
    p: &[f64],
    train: &SymmetricSparseNetwork,
) -> Result<Vec<f64>> {
    check_lengths(x, p)?;
    let op = operator(x, train, 0.0, 0.0)?;
    let mut out = vec![0.0; p.len()];
    op.gn_product_into(p, &mut out)?;
    Ok(out)
}

/// Gauss-Newton product plus the regularization diagonal.
pub fn regularized_gn_vector_product(
    x: &ParamVector,
    p: &[f64],
    train: &SymmetricSparseNetwork,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lengths(x, p)?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    let op = operator(x, train, lambda, 0.0)?;
    let mut out = vec![0.0; p.len()];
    op.regularized_product_into(p, &mut out)?;
    Ok(out)
}

/// Damped product `(N_Z + μ I) p`.
pub fn damped_product(
    x: &ParamVector,
    p: &[f64],
    train: &SymmetricSparseNetwork,
    lambda: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    check_lengths(x, p)?;
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::invalid(format!("damping mu must be > 0, got {mu}")));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    operator(x, train, lambda, mu)?.damped_product(p)
}

/// Dense damped operator assembled column by column from basis probes.
/// Only for tiny instances (side ≤ [`EXPLICIT_MATRIX_LIMIT`]).
pub fn explicit_gn_matrix(
    x: &ParamVector,
    train: &SymmetricSparseNetwork,
    lambda: f64,
    mu: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    if n > EXPLICIT_MATRIX_LIMIT {
        return Err(Error::invalid(format!(
            "explicit operator side {n} exceeds limit {EXPLICIT_MATRIX_LIMIT}"
        )));
    }
    let op = operator(x, train, lambda, mu)?;
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.damped_product_into(&e, &mut col)?;
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let scale = m.amax().max(1.0);
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NonFinite {
            context: format!("explicit operator is not symmetric (max asymmetry {asym:e})"),
        });
    }
    Ok(m)
}

/// Scale-aware central-difference step `1e-5 (1 + ‖x‖∞) / (‖p‖∞ + 1e-12)`.
pub fn default_fd_step(x: &ParamVector, p: &[f64]) -> f64 {
    let xn = x.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pn = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-5 * (1.0 + xn) / (pn + 1e-12)
}

/// Exact Hessian-vector product of `Z` approximated by central differences
/// of the analytic gradient. Diagnostic only.
pub fn hvp_finite_difference(
    x: &ParamVector,
    p: &[f64],
    train: &SymmetricSparseNetwork,
    lambda: f64,
    h: f64,
) -> Result<Vec<f64>> {
    check_lengths(x, p)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let problem = Problem::new(train, lambda);
    let plus = problem.gradient(&x.offset(p, h))?;
    let minus = problem.gradient(&x.offset(p, -h))?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, sigmoid, sigmoid_prime};
    use crate::network::Edge;

    fn single_edge() -> (SymmetricSparseNetwork, ParamVector) {
        let net = SymmetricSparseNetwork::from_edges(2, [Edge::new(0, 1, 0.8)]).unwrap();
        let x = ParamVector::new(2, vec![0.3, -0.2, 0.5, 1.1]).unwrap();
        (net, x)
    }

    #[test]
    fn single_edge_closed_form() {
        let (net, x) = single_edge();
        let xs = x.as_slice();
        let row = [
            sigmoid_prime(xs[0]),
            sigmoid_prime(xs[1]) * sigmoid(xs[3]),
            sigmoid_prime(xs[2]),
            sigmoid(xs[1]) * sigmoid_prime(xs[3]),
        ];
        let m = explicit_gn_matrix(&x, &net, 0.0, 1.0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = row[r] * row[c] + if r == c { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - expected).abs() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn zero_direction_gives_zero() {
        let (net, x) = single_edge();
        let p = [0.0; 4];
        assert!(jacobian_vector_product(&x, &p, &net)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(gn_vector_product(&x, &p, &net)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(damped_product(&x, &p, &net, 0.1, 2.0)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(hvp_finite_difference(&x, &p, &net, 0.1, 1e-5)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn argument_errors() {
        let (net, x) = single_edge();
        assert!(matches!(
            jacobian_vector_product(&x, &[0.0; 3], &net),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(damped_product(&x, &[0.0; 4], &net, 0.0, 0.0).is_err());
        assert!(damped_product(&x, &[0.0; 4], &net, 0.0, -1.0).is_err());
        assert!(hvp_finite_difference(&x, &[0.0; 4], &net, 0.0, 0.0).is_err());
        let big = init_params(51, 4, 1.0, 1).unwrap();
        let big_net = SymmetricSparseNetwork::from_edges(51, [Edge::new(0, 1, 1.0)]).unwrap();
        assert!(explicit_gn_matrix(&big, &big_net, 0.0, 1.0).is_err());
    }

    #[test]
    fn isolated_nodes_get_no_regularization_curvature() {
        let net = SymmetricSparseNetwork::from_edges(3, [Edge::new(0, 1, 1.0)]).unwrap();
        let x = init_params(3, 2, 1.0, 4).unwrap();
        let p = [0.3, -0.1, 0.7, 0.2, 0.9, -0.4];
        let n = gn_vector_product(&x, &p, &net).unwrap();
        let z = regularized_gn_vector_product(&x, &p, &net, 0.5).unwrap();
        assert_eq!(&z[4..], &[0.0, 0.0]);
        assert_eq!(&n[4..], &[0.0, 0.0]);
        assert_eq!(regularized_gn_vector_product(&x, &p, &net, 0.0).unwrap(), n);
    }

    #[test]
    fn fd_recovers_quadratic_curvature() {
        // For one edge with λ = 0 the Hessian along a direction that only moves
        // the two bias parameters of a perfect fit is J^T J restricted there.
        let x = ParamVector::zeros(2, 2);
        let g = crate::model::predict(&x, 0, 1).unwrap();
        let net = SymmetricSparseNetwork::from_edges(2, [Edge::new(0, 1, g)]).unwrap();
        let p = [1.0, 0.0, 0.0, 0.0];
        let fd = hvp_finite_difference(&x, &p, &net, 0.0, 1e-4).unwrap();
        let gn = gn_vector_product(&x, &p, &net).unwrap();
        for (a, b) in fd.iter().zip(&gn) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_regularization_diagonal() {
        let (net, x) = single_edge();
        let problem = Problem::new(&net, 0.2);
        let exact =
            GaussNewtonOperator::new(&problem, &x, 1e-3, RegularizationCurvature::Exact).unwrap();
        let printed =
            GaussNewtonOperator::new(&problem, &x, 1e-3, RegularizationCurvature::GaussNewton)
                .unwrap();
        let p = [0.0, 0.0, 1.0, 0.0];
        let a = exact.damped_product(&p).unwrap();
        let b = printed.damped_product(&p).unwrap();
        let (phi, dphi) = (sigmoid(0.5), sigmoid_prime(0.5));
        let expected = 0.2 * (dphi * dphi + phi * dphi * (1.0 - 2.0 * phi) - dphi * phi);
        assert!((a[2] - b[2] - expected).abs() < 1e-15);
    }
}
