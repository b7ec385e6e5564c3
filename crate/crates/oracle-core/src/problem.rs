use std::sync::Arc;

use crate::deflation::LowRankDeflation;
use crate::error::{check_dim, OptError, Result};
use crate::ledger::OracleLedger;
use crate::linalg::{axpy, dot, DenseMatrix};
use crate::operator::{Counted, LinearOperator};

/// `f(x) = 1/2 x^T A x + b^T x` with `A` available only through products.
#[derive(Clone)]
pub struct QuadraticProblem {
    op: Arc<dyn LinearOperator>,
    b: Vec<f64>,
    mu_hint: f64,
    dense: Option<Arc<DenseMatrix>>,
}

impl std::fmt::Debug for QuadraticProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadraticProblem")
            .field("dim", &self.dim())
            .field("mu_hint", &self.mu_hint)
            .field("has_dense", &self.dense.is_some())
            .finish()
    }
}

impl QuadraticProblem {
    /// Matrix-free problem.
    pub fn new(op: Arc<dyn LinearOperator>, b: Vec<f64>) -> Result<Self> {
        check_dim(op.dim(), b.len())?;
        Ok(Self {
            op,
            b,
            mu_hint: 0.0,
            dense: None,
        })
    }

    /// Problem backed by a dense symmetric matrix, which is also kept as ground truth.
    pub fn from_dense(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(OptError::DimensionMismatch {
                expected: a.rows(),
                got: a.cols(),
            });
        }
        if !a.is_symmetric(1e-12) {
            return Err(OptError::NotSymmetric(a.max_asymmetry()));
        }
        check_dim(a.rows(), b.len())?;
        let a = Arc::new(a);
        Ok(Self {
            op: a.clone(),
            b,
            mu_hint: 0.0,
            dense: Some(a),
        })
    }

    /// Attaches a dense copy of a matrix-free operator for verification.
    pub fn with_dense(mut self, a: DenseMatrix) -> Result<Self> {
        check_dim(self.dim(), a.rows())?;
        self.dense = Some(Arc::new(a));
        Ok(self)
    }

    pub fn with_mu_hint(mut self, mu: f64) -> Self {
        self.mu_hint = mu.max(0.0);
        self
    }

    pub fn with_b(mut self, b: Vec<f64>) -> Result<Self> {
        check_dim(self.dim(), b.len())?;
        self.b = b;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mu_hint(&self) -> f64 {
        self.mu_hint
    }

    pub fn dense_a(&self) -> Option<&DenseMatrix> {
        self.dense.as_deref()
    }

    /// The raw operator. Solvers must go through [`QuadraticProblem::counted`];
    /// this accessor exists for dense verification and reporting.
    pub fn operator(&self) -> &Arc<dyn LinearOperator> {
        &self.op
    }

    /// `A` wrapped so every product is charged as one gradient call.
    pub fn counted<'a>(&'a self, ledger: &'a OracleLedger) -> Counted<'a, dyn LinearOperator> {
        Counted::gradient(&*self.op, ledger)
    }

    /// `f(x)`, uncounted. Reporting and verification only.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let ax = self.op.apply(x);
        0.5 * dot(x, &ax) + dot(&self.b, x)
    }

    /// `f(x)` recovered for free from a gradient `g = A x + b` already paid for.
    pub fn objective_from_gradient(&self, x: &[f64], g: &[f64]) -> f64 {
        0.5 * x.iter().zip(g).zip(&self.b).map(|((xi, gi), bi)| xi * (gi + bi)).sum::<f64>()
    }
}

/// `A x + b`, charging exactly one gradient call.
pub fn counting_gradient(problem: &QuadraticProblem, ledger: &OracleLedger, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(problem.dim(), x.len())?;
    let mut g = problem.counted(ledger).apply(x);
    axpy(1.0, problem.b(), &mut g);
    Ok(g)
}

/// `(A - A_1) x + b`: one counted product plus a free low-rank correction.
pub fn deflated_gradient(
    problem: &QuadraticProblem,
    deflation: &LowRankDeflation,
    ledger: &OracleLedger,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_dim(problem.dim(), deflation.dim())?;
    let mut g = counting_gradient(problem, ledger, x)?;
    deflation.apply_add(-1.0, x, &mut g);
    Ok(g)
}
