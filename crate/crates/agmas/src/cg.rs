//! Conjugate gradient on `A x = -b` through the counted operator.

use log::debug;
use oracle_core::linalg::{axpy, dot, norm};
use oracle_core::{Branch, LinearOperator, OptError, OracleLedger, QuadraticProblem, Result, SolverReport, Trace};

/// Extra iterations allowed per attempt beyond `d`, as a multiple of `d`.
/// Rounding delays convergence on wide geometric spectra well past `d` steps.
pub const RESTART_SLACK: f64 = 5.0;

/// Runs CG until `||A x + b|| <= eps_res ||b||`.
///
/// Starting from zero costs no product for the initial residual. On stagnation
/// (iteration cap or lost positivity of `p^T A p`) CG restarts once from the
/// current iterate with a recomputed residual, then gives up.
pub fn conjugate_gradient(
    problem: &QuadraticProblem,
    ledger: &OracleLedger,
    x0: Option<&[f64]>,
    eps_res: f64,
) -> Result<SolverReport> {
    let d = problem.dim();
    let op = problem.counted(ledger);
    let b = problem.b();
    let target = eps_res * norm(b);
    let cap = d + (RESTART_SLACK * d as f64).ceil() as usize + 5;
    let mut trace = Trace::new();
    let mut x = x0.map_or_else(|| vec![0.0; d], |v| v.to_vec());
    let mut total = 0usize;
    for attempt in 0..2 {
        // r = -b - A x
        let mut r: Vec<f64> = b.iter().map(|v| -v).collect();
        if x0.is_some() || attempt > 0 {
            axpy(-1.0, &op.apply(&x), &mut r);
        }
        let mut rr = dot(&r, &r);
        let mut p = r.clone();
        let mut ap = vec![0.0; d];
        for _ in 0..cap {
            if rr.sqrt() <= target {
                return Ok(finish(problem, ledger, x, &r, total, trace));
            }
            op.apply_into(&p, &mut ap);
            total += 1;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) || !pap.is_finite() {
                debug!("cg attempt={attempt} lost positivity at iter={total}");
                break;
            }
            let alpha = rr / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            let rr_new = dot(&r, &r);
            let g: Vec<f64> = r.iter().map(|v| -v).collect();
            trace.record(total, ledger, problem.objective_from_gradient(&x, &g), rr_new.sqrt());
            let beta = rr_new / rr;
            rr = rr_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
        if rr.sqrt() <= target {
            return Ok(finish(problem, ledger, x, &r, total, trace));
        }
        debug!("cg attempt={attempt} stagnated at residual {:.3e}", rr.sqrt());
    }
    Err(OptError::NoConvergence {
        solver: "conjugate gradient".into(),
        iterations: total,
        residual: trace.last().map_or(f64::NAN, |p| p.residual),
    })
}

fn finish(problem: &QuadraticProblem, ledger: &OracleLedger, x: Vec<f64>, r: &[f64], iters: usize, trace: Trace) -> SolverReport {
    let g: Vec<f64> = r.iter().map(|v| -v).collect();
    SolverReport {
        objective: problem.objective_from_gradient(&x, &g),
        x_hat: x,
        ledger_snapshot: ledger.snapshot(),
        iterations: iters,
        trace,
        branch: Branch::Cg,
        residual: norm(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracle_core::DenseMatrix;

    #[test]
    fn finite_termination_on_three_eigenvalues() {
        let p = QuadraticProblem::from_dense(DenseMatrix::from_diag(&[1.0, 2.0, 3.0]), vec![1.0, -1.0, 2.0]).unwrap();
        let ledger = OracleLedger::new();
        let r = conjugate_gradient(&p, &ledger, None, 1e-10).unwrap();
        assert!(r.iterations <= 3);
        assert!(r.residual <= 1e-10 * 6f64.sqrt());
    }

    #[test]
    fn identity_takes_one_iteration() {
        let p = QuadraticProblem::from_dense(DenseMatrix::identity(7), vec![0.5; 7]).unwrap();
        let ledger = OracleLedger::new();
        let r = conjugate_gradient(&p, &ledger, None, 1e-12).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(ledger.grad_calls(), 1);
    }

    #[test]
    fn geometric_spectrum_survives_rounding_delay() {
        let diag: Vec<f64> = (0..30).map(|i| 10f64.powf(-5.0 * i as f64 / 29.0)).collect();
        let p = QuadraticProblem::from_dense(DenseMatrix::from_diag(&diag), vec![1.0 / 30f64.sqrt(); 30]).unwrap();
        let ledger = OracleLedger::new();
        let r = conjugate_gradient(&p, &ledger, None, 1e-9).unwrap();
        assert!(r.residual <= 1e-9);
        assert!(r.iterations <= 30 * 6 + 5);
    }
}
