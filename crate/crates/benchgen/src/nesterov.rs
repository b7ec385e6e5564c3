//! `f(x) = 1/2 (1 - x_1)^2 + 1/2 sum_i (x_{i+1} - x_i)^2` as a quadratic.

use std::sync::Arc;

use oracle_core::{DenseMatrix, LinearOperator, OptError, QuadraticProblem, Result};

use crate::spectrum::DENSE_LIMIT;

/// Symmetric tridiagonal operator.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn to_dense(&self) -> DenseMatrix {
        let d = self.diag.len();
        let mut a = DenseMatrix::from_diag(&self.diag);
        for (i, v) in self.off.iter().enumerate() {
            a[(i, i + 1)] = *v;
            a[(i + 1, i)] = *v;
        }
        debug_assert_eq!(a.rows(), d);
        a
    }
}

impl LinearOperator for Tridiagonal {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < x.len() {
                v += self.off[i] * x[i + 1];
            }
            out[i] = v;
        }
    }
}

/// The chain drops the constant `1/2`, so the problem's optimal value is `-1/2`
/// while the stated form has minimum 0 at the all-ones vector.
pub fn gen_nesterov_chain(d: usize) -> Result<QuadraticProblem> {
    if d < 2 {
        return Err(OptError::InvalidParameter(format!("chain needs d >= 2, got {d}")));
    }
    let mut diag = vec![2.0; d];
    diag[d - 1] = 1.0;
    let op = Tridiagonal {
        diag,
        off: vec![-1.0; d - 1],
    };
    let mut b = vec![0.0; d];
    b[0] = -1.0;
    let dense = (d <= DENSE_LIMIT).then(|| op.to_dense());
    let mut p = QuadraticProblem::new(Arc::new(op), b)?;
    if let Some(a) = dense {
        p = p.with_dense(a)?;
    }
    Ok(p)
}

/// Value of the stated form, constant included.
pub fn nesterov_chain_value(x: &[f64]) -> f64 {
    0.5 * (1.0 - x[0]).powi(2) + 0.5 * x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>()
}
