//! Dense check of approximate second-order stationarity.

use oracle_core::linalg::norm;
use oracle_core::{assemble_hessian, dense_eigendecomposition, Result, SecondOrderOracle};

use crate::config::{curvature_constant, grad_constant};

/// Largest dimension at which a dense Hessian is assembled.
pub const SSP_MAX_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SspCertificate {
    pub pass: bool,
    pub grad_norm: f64,
    pub lambda_min: f64,
    /// `C_g eps`.
    pub grad_bound: f64,
    /// `-C_h sqrt(H eps)`.
    pub curvature_bound: f64,
}

/// Checks `||∇f(x)|| <= C_g eps` and `λ_min(∇²f(x)) >= -C_h sqrt(H eps)` with
/// `c1 = c2 = 1`. The Hessian is assembled from uncounted HVPs.
pub fn ssp_certificate(oracle: &dyn SecondOrderOracle, x: &[f64], eps: f64, h: f64) -> Result<SspCertificate> {
    ssp_certificate_with(oracle, x, eps, h, 1.0, 1.0)
}

pub fn ssp_certificate_with(
    oracle: &dyn SecondOrderOracle,
    x: &[f64],
    eps: f64,
    h: f64,
    c1: f64,
    c2: f64,
) -> Result<SspCertificate> {
    let grad_norm = norm(&oracle.grad(x));
    let lambda_min = dense_eigendecomposition(&assemble_hessian(oracle, x))?.min();
    let grad_bound = grad_constant(c1, c2) * eps;
    let curvature_bound = -curvature_constant(c1, c2) * (h * eps).sqrt();
    Ok(SspCertificate {
        pass: grad_norm <= grad_bound && lambda_min >= curvature_bound,
        grad_norm,
        lambda_min,
        grad_bound,
        curvature_bound,
    })
}
