//! Symmetric linear operators and the wrappers the solvers compose.

use crate::deflation::LowRankDeflation;
use crate::ledger::OracleLedger;
use crate::linalg::{axpy, dot, DenseMatrix};

/// A symmetric linear map `R^d -> R^d`.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        out
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Diagonal operator.
#[derive(Debug, Clone)]
pub struct DiagonalOperator(pub Vec<f64>);

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.0).zip(x) {
            *o = d * xi;
        }
    }
}

/// Which ledger counter an operator application charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    Gradient,
    Hvp,
}

/// Charges one oracle call per application of the inner operator.
pub struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    ledger: &'a OracleLedger,
    charge: Charge,
}

impl<'a, O: LinearOperator + ?Sized> Counted<'a, O> {
    pub fn gradient(inner: &'a O, ledger: &'a OracleLedger) -> Self {
        Self {
            inner,
            ledger,
            charge: Charge::Gradient,
        }
    }

    pub fn hvp(inner: &'a O, ledger: &'a OracleLedger) -> Self {
        Self {
            inner,
            ledger,
            charge: Charge::Hvp,
        }
    }

    pub fn ledger(&self) -> &'a OracleLedger {
        self.ledger
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for Counted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self.charge {
            Charge::Gradient => self.ledger.record_grad(1),
            Charge::Hvp => self.ledger.record_hvp(1),
        }
        self.inner.apply_into(x, out)
    }
}

/// `scale * A + shift * I`
pub struct Shifted<O> {
    pub inner: O,
    pub scale: f64,
    pub shift: f64,
}

impl<O: LinearOperator> Shifted<O> {
    pub fn new(inner: O, scale: f64, shift: f64) -> Self {
        Self {
            inner,
            scale,
            shift,
        }
    }
}

impl<O: LinearOperator> LinearOperator for Shifted<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.apply_into(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.scale * *o + self.shift * xi;
        }
    }
}

/// `A - A_1` where `A_1` is a low-rank deflation. The correction is free.
pub struct Deflated<'d, O> {
    pub inner: O,
    pub deflation: &'d LowRankDeflation,
}

impl<'d, O: LinearOperator> Deflated<'d, O> {
    pub fn new(inner: O, deflation: &'d LowRankDeflation) -> Self {
        Self { inner, deflation }
    }
}

impl<O: LinearOperator> LinearOperator for Deflated<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.apply_into(x, out);
        self.deflation.apply_add(-1.0, x, out);
    }
}

/// `P A P` with `P = I - U U^T` for orthonormal columns `U`.
pub struct Projected<'u, O> {
    pub inner: O,
    pub basis: &'u [Vec<f64>],
}

impl<O: LinearOperator> LinearOperator for Projected<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut px = x.to_vec();
        crate::linalg::project_out(self.basis, &mut px);
        self.inner.apply_into(&px, out);
        crate::linalg::project_out(self.basis, out);
    }
}

/// Rayleigh quotient `x^T A x / x^T x` (one application).
pub fn rayleigh<O: LinearOperator + ?Sized>(op: &O, x: &[f64]) -> f64 {
    let ax = op.apply(x);
    dot(x, &ax) / dot(x, x)
}

/// Materializes the operator column by column. Test scale only.
pub fn to_dense<O: LinearOperator + ?Sized>(op: &O) -> DenseMatrix {
    let n = op.dim();
    let mut m = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// `out += alpha * A x` helper for composite operators.
pub fn apply_add<O: LinearOperator + ?Sized>(op: &O, alpha: f64, x: &[f64], out: &mut [f64]) {
    let ax = op.apply(x);
    axpy(alpha, &ax, out);
}
