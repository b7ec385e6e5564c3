//! Closed-form prox of `h(x) = 1/2 x^T A_1 x` for a low-rank `A_1`.

use oracle_core::linalg::{axpy, dot, norm, DenseMatrix};
use oracle_core::{linalg, LowRankDeflation, OptError, Result};

const MAX_CORE_CONDITION: f64 = 1e14;

/// Cached factorization of `(A_1 + L I)^{-1} L` through the rank-r identity
/// `(A_1 + L I)^{-1} L = I - V (L D^{-1} + V^T V)^{-1} V^T` with `A_1 = V D V^T`.
#[derive(Debug, Clone)]
pub struct LowRankProx {
    deflation: LowRankDeflation,
    l: f64,
    core: DenseMatrix,
    factor: Option<DenseMatrix>,
}

impl LowRankProx {
    pub fn new(deflation: &LowRankDeflation, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(OptError::InvalidParameter(format!("prox step L must be positive, got {l}")));
        }
        let vecs = deflation.vecs();
        let weights = deflation.weights();
        let r = vecs.len();
        let mut core = DenseMatrix::zeros(r, r);
        for i in 0..r {
            for j in 0..=i {
                let g = dot(&vecs[i], &vecs[j]);
                core[(i, j)] = g;
                core[(j, i)] = g;
            }
            core[(i, i)] += l / weights[i];
        }
        let factor = linalg::cholesky(&core).ok().filter(|f| {
            let d = f.diag();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            r == 0 || (hi / lo).powi(2) <= MAX_CORE_CONDITION
        });
        Ok(Self {
            deflation: deflation.clone(),
            l,
            core,
            factor,
        })
    }

    pub fn step(&self) -> f64 {
        self.l
    }

    pub fn deflation(&self) -> &LowRankDeflation {
        &self.deflation
    }

    /// `argmin_x { 1/2 x^T A_1 x + (L/2) ||x - y||^2 }`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.apply_once(y)?;
        // One refinement step when the core solve lost accuracy.
        let mut res: Vec<f64> = y.iter().zip(&x).map(|(yi, xi)| self.l * (yi - xi)).collect();
        self.deflation.apply_add(-1.0, &x, &mut res);
        if norm(&res) > 1e-12 * self.l * norm(y) {
            let dx = self.apply_once(&res)?;
            axpy(1.0 / self.l, &dx, &mut x);
        }
        Ok(x)
    }

    fn apply_once(&self, y: &[f64]) -> Result<Vec<f64>> {
        let vecs = self.deflation.vecs();
        if vecs.is_empty() {
            return Ok(y.to_vec());
        }
        let t: Vec<f64> = vecs.iter().map(|v| dot(v, y)).collect();
        let s = match &self.factor {
            Some(f) => linalg::cholesky_solve(f, &t),
            None => linalg::gaussian_solve(&self.core, &t)?,
        };
        let mut x = y.to_vec();
        for (si, v) in s.iter().zip(vecs) {
            axpy(-si, v, &mut x);
        }
        Ok(x)
    }

    /// `h(x) = 1/2 x^T A_1 x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.deflation.quadratic_form(x)
    }

    /// `out += A_1 x`.
    pub fn grad_add(&self, x: &[f64], out: &mut [f64]) {
        self.deflation.apply_add(1.0, x, out);
    }
}

/// One-shot form of [`LowRankProx::apply`].
pub fn prox_lowrank_quadratic(deflation: &LowRankDeflation, l: f64, y: &[f64]) -> Result<Vec<f64>> {
    LowRankProx::new(deflation, l)?.apply(y)
}
