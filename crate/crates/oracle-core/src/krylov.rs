use crate::linalg::{axpy, dot, norm};
use crate::operator::LinearOperator;

/// Result of [`cg_solve`].
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Recurrence residual `||rhs - A x||`.
    pub residual_norm: f64,
    pub converged: bool,
    /// A search direction with `p^T A p <= 0` was met; the operator is not positive definite.
    pub negative_curvature: bool,
}

/// Conjugate gradient for `A x = rhs` with symmetric positive definite `A`.
///
/// Stops when `||r|| <= rel_tol * ||rhs||`. With `x0 = None` the start is zero
/// and no product is spent on the initial residual.
pub fn cg_solve<O: LinearOperator + ?Sized>(
    op: &O,
    rhs: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    let target = rel_tol * rhs_norm;
    let (mut x, mut r) = match x0 {
        Some(x0) => {
            let ax = op.apply(x0);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            (x0.to_vec(), r)
        }
        None => (vec![0.0; n], rhs.to_vec()),
    };
    let mut rr = dot(&r, &r);
    if rhs_norm == 0.0 || rr.sqrt() <= target {
        return CgOutcome {
            x,
            iterations: 0,
            residual_norm: rr.sqrt(),
            converged: true,
            negative_curvature: false,
        };
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return CgOutcome {
                x,
                iterations: it,
                residual_norm: rr.sqrt(),
                converged: false,
                negative_curvature: true,
            };
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return CgOutcome {
                x,
                iterations: it,
                residual_norm: rr_new.sqrt(),
                converged: true,
                negative_curvature: false,
            };
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    CgOutcome {
        x,
        iterations: max_iter,
        residual_norm: rr.sqrt(),
        converged: false,
        negative_curvature: false,
    }
}
