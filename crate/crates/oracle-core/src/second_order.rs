//! Generic twice-differentiable objectives and the counting layer in front of them.

use std::sync::Arc;

use crate::error::{check_dim, Result};
use crate::ledger::OracleLedger;
use crate::linalg::{axpy, dot, norm_sq, DenseMatrix};
use crate::operator::{LinearOperator, Shifted};
use crate::problem::QuadraticProblem;

/// Value, gradient and Hessian-vector product of a smooth objective.
pub trait SecondOrderOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
    /// Lipschitz constant of the Hessian on the region of interest.
    fn hessian_lipschitz(&self) -> f64;
}

/// Charges every gradient and HVP to a ledger. Function values are free;
/// none of the algorithms need them and they only feed reports.
#[derive(Clone, Copy)]
pub struct CountingOracle<'a> {
    oracle: &'a dyn SecondOrderOracle,
    ledger: &'a OracleLedger,
}

impl<'a> CountingOracle<'a> {
    pub fn new(oracle: &'a dyn SecondOrderOracle, ledger: &'a OracleLedger) -> Self {
        Self { oracle, ledger }
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn ledger(&self) -> &'a OracleLedger {
        self.ledger
    }

    pub fn inner(&self) -> &'a dyn SecondOrderOracle {
        self.oracle
    }

    pub fn hessian_lipschitz(&self) -> f64 {
        self.oracle.hessian_lipschitz()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.oracle.value(x)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        self.ledger.record_grad(1);
        Ok(self.oracle.grad(x))
    }

    pub fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), v.len())?;
        self.ledger.record_hvp(1);
        Ok(self.oracle.hvp(x, v))
    }

    /// The Hessian at `x` as a linear operator charging one HVP per product.
    pub fn hessian_at(&self, x: &[f64]) -> HessianOperator<'a> {
        HessianOperator {
            oracle: *self,
            x: x.to_vec(),
        }
    }
}

/// `v -> ∇²f(x) v` through a counting oracle.
pub struct HessianOperator<'a> {
    oracle: CountingOracle<'a>,
    x: Vec<f64>,
}

impl LinearOperator for HessianOperator<'_> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.oracle.ledger.record_hvp(1);
        out.copy_from_slice(&self.oracle.oracle.hvp(&self.x, v));
    }
}

/// `∇²f(x)` frozen at a point, owning its oracle. Uncounted; wrap it in a
/// [`QuadraticProblem`] and let the solver charge through [`QuadraticProblem::counted`].
pub struct HessianSnapshot {
    oracle: Arc<dyn SecondOrderOracle>,
    x: Vec<f64>,
}

impl HessianSnapshot {
    pub fn new(oracle: Arc<dyn SecondOrderOracle>, x: &[f64]) -> Result<Self> {
        check_dim(oracle.dim(), x.len())?;
        Ok(Self { oracle, x: x.to_vec() })
    }
}

impl LinearOperator for HessianSnapshot {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.oracle.hvp(&self.x, v));
    }
}

/// The model `z -> g^T z + 1/2 z^T (∇²f(x) + shift I) z` in the step `z = y - x`,
/// with `g = ∇f(x)` already paid for by the caller.
pub fn regularized_model(
    oracle: Arc<dyn SecondOrderOracle>,
    x: &[f64],
    grad: Vec<f64>,
    shift: f64,
) -> Result<QuadraticProblem> {
    let h = HessianSnapshot::new(oracle, x)?;
    QuadraticProblem::new(Arc::new(Shifted::new(h, 1.0, shift)), grad)
}

/// Dense Hessian assembled from `d` uncounted HVPs. Test scale only.
pub fn assemble_hessian(oracle: &dyn SecondOrderOracle, x: &[f64]) -> DenseMatrix {
    let n = oracle.dim();
    let mut h = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = oracle.hvp(x, &e);
        for i in 0..n {
            h[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    // Symmetrize round-off.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// A quadratic problem seen as a second-order oracle.
pub struct QuadraticOracle {
    problem: QuadraticProblem,
    h: f64,
}

impl QuadraticOracle {
    /// Any positive number bounds the Hessian variation of a quadratic; 1 is used by default.
    pub fn new(problem: QuadraticProblem) -> Self {
        Self { problem, h: 1.0 }
    }

    pub fn with_hessian_lipschitz(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn problem(&self) -> &QuadraticProblem {
        &self.problem
    }
}

impl SecondOrderOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.problem.objective(x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.problem.operator().apply(x);
        axpy(1.0, self.problem.b(), &mut g);
        g
    }

    fn hvp(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.problem.operator().apply(v)
    }

    fn hessian_lipschitz(&self) -> f64 {
        self.h
    }
}

/// `f(x) = (c/4) ||x||^4 + 1/2 sum_i d_i x_i^2`.
#[derive(Debug, Clone)]
pub struct QuarticQuadratic {
    pub c: f64,
    pub diag: Vec<f64>,
    /// Hessian-Lipschitz constant valid on the region the caller works in.
    pub h: f64,
}

impl QuarticQuadratic {
    /// Uses `H = 6 c R`, valid on the ball of radius `radius`.
    pub fn new(c: f64, diag: Vec<f64>, radius: f64) -> Self {
        Self {
            c,
            diag,
            h: 6.0 * c * radius,
        }
    }
}

impl SecondOrderOracle for QuarticQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r2 = norm_sq(x);
        0.25 * self.c * r2 * r2 + 0.5 * x.iter().zip(&self.diag).map(|(xi, d)| d * xi * xi).sum::<f64>()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r2 = norm_sq(x);
        x.iter().zip(&self.diag).map(|(xi, d)| self.c * r2 * xi + d * xi).collect()
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let r2 = norm_sq(x);
        let xv = dot(x, v);
        x.iter()
            .zip(v)
            .zip(&self.diag)
            .map(|((xi, vi), d)| self.c * (r2 * vi + 2.0 * xv * xi) + d * vi)
            .collect()
    }

    fn hessian_lipschitz(&self) -> f64 {
        self.h
    }
}

/// `f(x) = 1/4 (x_1^2 - 1)^2 + 1/2 sum_{i>=2} x_i^2`: a saddle at the origin,
/// minimizers at `±e_1`.
#[derive(Debug, Clone)]
pub struct DoubleWell {
    pub dim: usize,
    pub h: f64,
}

impl DoubleWell {
    /// `H = 6 sqrt(2)` covers the sublevel set `{f <= 1/4}` where `|x_1| <= sqrt(2)`.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            h: 6.0 * std::f64::consts::SQRT_2,
        }
    }
}

impl SecondOrderOracle for DoubleWell {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let w = x[0] * x[0] - 1.0;
        0.25 * w * w + 0.5 * x[1..].iter().map(|v| v * v).sum::<f64>()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = x.to_vec();
        g[0] = x[0] * x[0] * x[0] - x[0];
        g
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        out[0] = (3.0 * x[0] * x[0] - 1.0) * v[0];
        out
    }

    fn hessian_lipschitz(&self) -> f64 {
        self.h
    }
}
