//! Outer loop of the inexact cubic-regularization method.

use std::sync::Arc;

use eigen_tools::estimate_norm;
use log::info;
use oracle_core::linalg::norm;
use oracle_core::{Branch, CountingOracle, OptError, OracleLedger, Result, SecondOrderOracle, SolverReport, Trace};

use crate::certificate::{ssp_certificate_with, SspCertificate, SSP_MAX_DIM};
use crate::config::CubicConfig;
use crate::search::c_cubic_binary_search;

/// One accepted outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicIterate {
    pub k: usize,
    pub r: f64,
    pub f_before: f64,
    pub f_after: f64,
    pub lambda_est: f64,
    pub l_initial: f64,
    pub probes: usize,
    pub capped: bool,
}

#[derive(Debug, Clone)]
pub struct CubicReport {
    pub report: SolverReport,
    pub iterates: Vec<CubicIterate>,
    pub eps_b: f64,
    pub tau: f64,
    /// False when `max_iters` ran out before a step fell below `sqrt(eps/H)`.
    pub converged: bool,
    /// Dense certificate at the returned point, when `d <= SSP_MAX_DIM`.
    pub certificate: Option<SspCertificate>,
}

/// Runs radius searches until the accepted step is shorter than `sqrt(eps/H)`
/// (and, with `curvature_guard`, the eigenvalue estimate shows no strong negative curvature).
pub fn cubic_solve(
    oracle: &Arc<dyn SecondOrderOracle>,
    x0: &[f64],
    cfg: &CubicConfig,
    ledger: &OracleLedger,
) -> Result<CubicReport> {
    cfg.validate()?;
    let d = oracle.dim();
    if x0.len() != d {
        return Err(OptError::DimensionMismatch { expected: d, got: x0.len() });
    }
    let counted = CountingOracle::new(&**oracle, ledger);
    let tau = match cfg.tau_bound {
        Some(t) => t,
        None => {
            let hn = estimate_norm(&counted.hessian_at(x0), 10, cfg.seed ^ 0x5eed);
            (2.0 * d as f64 * hn).max(f64::MIN_POSITIVE)
        }
    };
    let eps_b = cfg.eps_b.unwrap_or_else(|| cfg.eps_b_for(tau));

    let mut x = x0.to_vec();
    let mut fx = oracle.value(&x);
    let mut trace = Trace::new();
    trace.record(0, ledger, fx, f64::NAN);
    let mut iterates = Vec::new();
    let mut converged = false;
    let exit = cfg.radius_unit();
    for k in 1..=cfg.max_iters {
        let step = c_cubic_binary_search(oracle, &x, cfg, eps_b, ledger)
            .map_err(|e| e.context(format!("cubic iteration {k}")))?;
        let f_new = oracle.value(&step.y);
        iterates.push(CubicIterate {
            k,
            r: step.r,
            f_before: fx,
            f_after: f_new,
            lambda_est: step.state.lambda_min_est,
            l_initial: step.l_initial,
            probes: step.probes,
            capped: step.capped,
        });
        trace.record(k, ledger, f_new, step.r);
        info!(
            "cubic k={k} r={:.4e} f={f_new:.10e} lambda={:.3e} probes={} grad_calls={} hvp_calls={}",
            step.r,
            step.state.lambda_min_est,
            step.probes,
            ledger.grad_calls(),
            ledger.hvp_calls()
        );
        x = step.y;
        fx = f_new;
        let flat_enough = !cfg.curvature_guard || step.state.lambda_min_est >= -cfg.exit_curvature();
        if step.r < exit && flat_enough {
            converged = true;
            break;
        }
    }
    let certificate = if d <= SSP_MAX_DIM {
        Some(ssp_certificate_with(&**oracle, &x, cfg.eps, cfg.h, cfg.c1, cfg.c2)?)
    } else {
        None
    };
    let residual = iterates.last().map_or(f64::NAN, |it: &CubicIterate| it.r);
    Ok(CubicReport {
        report: SolverReport {
            objective: fx,
            ledger_snapshot: ledger.snapshot(),
            iterations: iterates.len(),
            trace,
            branch: Branch::NotApplicable,
            residual,
            x_hat: x,
        },
        iterates,
        eps_b,
        tau,
        converged,
        certificate,
    })
}

/// Gradient norm at the returned point, uncounted.
pub fn final_grad_norm(oracle: &dyn SecondOrderOracle, report: &CubicReport) -> f64 {
    norm(&oracle.grad(&report.report.x_hat))
}
