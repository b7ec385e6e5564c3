//! The regularized second-order subproblem and its accuracy threshold.

use std::sync::Arc;

use agmas::{agmas_solve_from, AgmasConfig};
use eigen_tools::estimate_norm;
use oracle_core::linalg::{add, dot, norm, scaled, sub};
use oracle_core::{
    regularized_model, CountingOracle, LinearOperator, OptError, OracleLedger, Result, SecondOrderOracle, Shifted,
};

/// Number of power steps behind the local smoothness estimate.
pub const LOCAL_POWER_STEPS: usize = 5;

/// Relative gradient accuracy below which the subproblem solve is not pushed.
pub const NUMERIC_FLOOR: f64 = 1e-13;

/// `∇f_x(y) = ∇f(x) + ∇²f(x)(y - x)`. Charges one HVP, plus one gradient
/// unless `grad_center` is supplied.
pub fn soe_gradient(oracle: &CountingOracle<'_>, center: &[f64], grad_center: Option<&[f64]>, y: &[f64]) -> Result<Vec<f64>> {
    let g = match grad_center {
        Some(g) => g.to_vec(),
        None => oracle.grad(center)?,
    };
    let hv = oracle.hvp(center, &sub(y, center))?;
    Ok(add(&g, &hv))
}

/// Threshold on the subproblem accuracy together with a stall flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsA {
    pub value: f64,
    /// Set when the gap proxy was zero and the floor value was returned.
    pub stalled: bool,
}

/// `(sigma - sigma_u)^2 / (2 gamma (L gamma + 1 + (sigma - sigma_u)^2)(L + 1/gamma)) * gap`.
pub fn eps_a_threshold(gamma: f64, l_local: f64, sigma: f64, sigma_u: f64, gap_proxy: f64) -> EpsA {
    if !(gap_proxy > 0.0) {
        return EpsA {
            value: f64::MIN_POSITIVE,
            stalled: true,
        };
    }
    let s2 = (sigma - sigma_u).powi(2);
    let value = s2 / (2.0 * gamma * (l_local * gamma + 1.0 + s2) * (l_local + 1.0 / gamma)) * gap_proxy;
    EpsA { value, stalled: false }
}

/// Local data at the extrapolated point that the accuracy threshold needs.
#[derive(Debug, Clone)]
pub struct LocalModel {
    /// Upper estimate of `||∇²f(x) + I/gamma||`.
    pub l_local: f64,
    /// `f(x) - g(y_1)` for the damped step `y_1 = x - ∇f(x) / l_local`; a lower bound on `f(x) - g*`.
    pub gap_proxy: f64,
    /// The damped step `y_1 - x`, reused as warm start.
    pub damped_step: Vec<f64>,
}

/// Estimates `L` from a few power steps on `∇²f(x) + I/gamma` and evaluates the
/// gap proxy at the damped step. Charges `LOCAL_POWER_STEPS + 1` HVPs.
pub fn local_model(oracle: &CountingOracle<'_>, x: &[f64], grad: &[f64], gamma: f64, seed: u64) -> Result<LocalModel> {
    let shifted = Shifted::new(oracle.hessian_at(x), 1.0, 1.0 / gamma);
    let l_local = estimate_norm(&shifted, LOCAL_POWER_STEPS, seed).max(1.0 / gamma);
    let gn2 = dot(grad, grad);
    if gn2 == 0.0 {
        return Ok(LocalModel {
            l_local,
            gap_proxy: 0.0,
            damped_step: vec![0.0; x.len()],
        });
    }
    let z = scaled(-1.0 / l_local, grad);
    let mz = shifted.apply(&z);
    let gap_proxy = -(dot(grad, &z) + 0.5 * dot(&z, &mz));
    Ok(LocalModel {
        l_local,
        gap_proxy: gap_proxy.max(0.0),
        damped_step: z,
    })
}

/// `argmin_y f_x(y) + 1/(2 gamma) ||y - x||^2` to accuracy `eps_a`, solved by AGMAS
/// on the operator `∇²f(x) + I/gamma` with strong convexity `1/gamma`.
///
/// The AGMAS certificate gives `||∇g(y)||^2 <= 2 eps_a / gamma`. The accuracy is
/// clamped from below so that this gradient target stays above
/// `NUMERIC_FLOOR * ||∇f(x)||`.
#[allow(clippy::too_many_arguments)]
pub fn anpe_subproblem(
    oracle: &Arc<dyn SecondOrderOracle>,
    center: &[f64],
    grad_center: &[f64],
    gamma: f64,
    eps_a: f64,
    ledger: &OracleLedger,
    warm_step: Option<&[f64]>,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(OptError::InvalidParameter(format!("gamma = {gamma}")));
    }
    let d = center.len();
    let floor = 0.5 * gamma * (NUMERIC_FLOOR * norm(grad_center)).powi(2);
    let eps = eps_a.max(floor).max(f64::MIN_POSITIVE);
    let problem = regularized_model(oracle.clone(), center, grad_center.to_vec(), 1.0 / gamma)?;
    let mut cfg = AgmasConfig::new(eps, 1.0 / gamma, d);
    cfg.extractor.seed = seed;
    let z0 = warm_step.map_or_else(|| vec![0.0; d], |z| z.to_vec());
    let rep = agmas_solve_from(&problem, &cfg, ledger, &z0).map_err(|e| match e.root() {
        OptError::Divergence(_) | OptError::NonFinite(_) => {
            OptError::NegativeCurvature(format!("A-NPE subproblem at gamma = {gamma:e}: {e}"))
        }
        _ => e.context(format!("A-NPE subproblem at gamma = {gamma:e}")),
    })?;
    Ok(add(center, &rep.x_hat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_formula() {
        let e = eps_a_threshold(1.0, 1.0, 0.5, 0.4, 1.0);
        assert!((e.value - 0.01 / 8.04).abs() < 1e-15);
        assert!(!e.stalled);
        let e2 = eps_a_threshold(1.0, 1.0, 0.5, 0.4, 2.0);
        assert!((e2.value - 2.0 * e.value).abs() < 1e-15);
    }

    #[test]
    fn zero_gap_is_flagged() {
        let e = eps_a_threshold(1.0, 1.0, 0.5, 0.4, 0.0);
        assert!(e.stalled && e.value > 0.0);
    }
}
