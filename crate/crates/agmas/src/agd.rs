//! Accelerated (proximal) gradient descent with a certified stop.

use log::debug;
use oracle_core::linalg::{all_finite, dist, norm, norm_sq};
use oracle_core::{
    counting_gradient, deflated_gradient, Branch, LowRankDeflation, OptError, OracleLedger, QuadraticProblem, Result,
    SolverReport, Trace,
};

use crate::prox::LowRankProx;

/// A smooth function whose gradient calls are charged to a ledger.
pub trait GradientSource {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `f(x)` from a gradient at `x` that was already paid for; free.
    fn objective_from_gradient(&self, x: &[f64], g: &[f64]) -> f64;
    fn ledger(&self) -> &OracleLedger;
}

/// `1/2 x^T (A - A_1) x + b^T x`, with `A_1` optional.
pub struct QuadraticGradient<'a> {
    pub problem: &'a QuadraticProblem,
    pub deflation: Option<&'a LowRankDeflation>,
    pub ledger: &'a OracleLedger,
}

impl<'a> QuadraticGradient<'a> {
    pub fn new(problem: &'a QuadraticProblem, ledger: &'a OracleLedger) -> Self {
        Self {
            problem,
            deflation: None,
            ledger,
        }
    }

    pub fn deflated(problem: &'a QuadraticProblem, deflation: &'a LowRankDeflation, ledger: &'a OracleLedger) -> Self {
        Self {
            problem,
            deflation: Some(deflation),
            ledger,
        }
    }
}

impl GradientSource for QuadraticGradient<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.deflation {
            Some(d) => deflated_gradient(self.problem, d, self.ledger, x),
            None => counting_gradient(self.problem, self.ledger, x),
        }
    }

    fn objective_from_gradient(&self, x: &[f64], g: &[f64]) -> f64 {
        self.problem.objective_from_gradient(x, g)
    }

    fn ledger(&self) -> &OracleLedger {
        self.ledger
    }
}

#[derive(Debug, Clone)]
pub struct AgdParams {
    /// Smoothness constant used for the step `1/L`.
    pub l: f64,
    /// Strong convexity used in the momentum; 0 selects the `t_k` schedule.
    pub mu: f64,
    /// Strong convexity of the full objective used by the stop test.
    pub cert_mu: f64,
    pub eps: f64,
    /// Upper bound on `f(x0) - f*`; only sizes the iteration cap.
    pub f_gap_bound: f64,
    /// Bound on `||x - x*||` used by the stop test when `cert_mu == 0`.
    pub radius: Option<f64>,
    pub max_iters: Option<usize>,
}

impl AgdParams {
    pub fn new(l: f64, mu: f64, eps: f64) -> Self {
        Self {
            l,
            mu,
            cert_mu: mu,
            eps,
            f_gap_bound: 1.0,
            radius: None,
            max_iters: None,
        }
    }

    fn iteration_cap(&self) -> usize {
        if let Some(m) = self.max_iters {
            return m;
        }
        let log = (self.f_gap_bound.max(self.eps) / self.eps).ln().max(1.0) + 10.0;
        let rate = if self.mu > 0.0 {
            (self.l / self.mu).sqrt()
        } else {
            (self.l * self.radius.unwrap_or(1.0).powi(2) / self.eps).sqrt()
        };
        (40.0 * rate * log).min(1e8) as usize + 200
    }

    fn certified(&self, grad_norm: f64) -> bool {
        if self.cert_mu > 0.0 {
            grad_norm * grad_norm <= 2.0 * self.cert_mu * self.eps
        } else {
            grad_norm * self.radius.unwrap_or(f64::INFINITY) <= self.eps
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(OptError::InvalidParameter(format!("L = {}", self.l)));
        }
        if !(self.mu >= 0.0 && self.mu <= self.l) {
            return Err(OptError::InvalidParameter(format!("mu = {} with L = {}", self.mu, self.l)));
        }
        if !(self.eps > 0.0) {
            return Err(OptError::InvalidParameter(format!("eps = {}", self.eps)));
        }
        if self.cert_mu <= 0.0 && self.radius.is_none() {
            return Err(OptError::InvalidParameter("mu = 0 needs a distance bound".into()));
        }
        Ok(())
    }
}

/// Nesterov's accelerated gradient method on a smooth function.
///
/// Stops once a fresh gradient certifies `f(x) - f* <= eps`: `||grad||^2 <= 2 mu eps`
/// for strongly convex `f`, `||grad|| R <= eps` otherwise.
pub fn accelerated_gradient<G: GradientSource + ?Sized>(src: &G, params: &AgdParams, x0: &[f64]) -> Result<SolverReport> {
    run(src, None, params, x0, Branch::Agd)
}

/// Accelerated proximal gradient on `g(x) + 1/2 x^T A_1 x`, prox in closed form.
pub fn accelerated_prox_gradient<G: GradientSource + ?Sized>(
    src: &G,
    prox: &LowRankProx,
    params: &AgdParams,
    x0: &[f64],
) -> Result<SolverReport> {
    run(src, Some(prox), params, x0, Branch::ProxAgd)
}

fn run<G: GradientSource + ?Sized>(
    src: &G,
    prox: Option<&LowRankProx>,
    params: &AgdParams,
    x0: &[f64],
    branch: Branch,
) -> Result<SolverReport> {
    params.validate()?;
    if x0.len() != src.dim() {
        return Err(OptError::DimensionMismatch {
            expected: src.dim(),
            got: x0.len(),
        });
    }
    let l = params.l;
    let kappa = if params.mu > 0.0 { l / params.mu } else { f64::INFINITY };
    let beta_const = if params.mu > 0.0 {
        let s = kappa.sqrt();
        (s - 1.0) / (s + 1.0)
    } else {
        0.0
    };
    let objective = |x: &[f64], g: &[f64]| src.objective_from_gradient(x, g) + prox.map_or(0.0, |p| p.value(x));
    let full_grad = |x: &[f64], g: &[f64]| {
        let mut out = g.to_vec();
        if let Some(p) = prox {
            p.grad_add(x, &mut out);
        }
        out
    };

    let cap = params.iteration_cap();
    let mut trace = Trace::new();
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = 1.0_f64;
    let mut f_init = f64::NAN;
    let mut g_init = 0.0;
    let mut prev_f = f64::INFINITY;
    let mut increases = 0usize;
    let mut verify_below = f64::INFINITY;
    for k in 0..cap {
        let gy = src.gradient(&y)?;
        let fy = objective(&y, &gy);
        let gnorm = norm(&full_grad(&y, &gy));
        if k == 0 {
            f_init = fy;
            g_init = gnorm;
            if params.certified(gnorm) {
                return Ok(report(src, y, fy, k, trace, branch, gnorm));
            }
        }
        if !all_finite(&gy) || !fy.is_finite() {
            return Err(OptError::NonFinite(format!("{branch} iterate {k}")));
        }
        if gnorm > 10.0 * kappa.min(1e12).max(10.0) * g_init.max(f64::MIN_POSITIVE) {
            return Err(OptError::Divergence(format!("{branch}: gradient grew to {gnorm:e} at iterate {k}")));
        }
        if fy > prev_f && fy > f_init {
            increases += 1;
            if increases >= 10 {
                return Err(OptError::Divergence(format!("{branch}: objective rose 10 times in a row at {k}")));
            }
        } else {
            increases = 0;
        }
        prev_f = fy;

        let v: Vec<f64> = y.iter().zip(&gy).map(|(yi, gi)| yi - gi / l).collect();
        let x_new = match prox {
            Some(p) => p.apply(&v)?,
            None => v,
        };
        let mapping = l * dist(&y, &x_new);
        trace.record(k, src.ledger(), fy, gnorm);
        debug!("{branch} iter={k} f={fy:.12e} grad={gnorm:.3e} mapping={mapping:.3e}");

        if params.certified(mapping) && mapping < verify_below {
            let gx = src.gradient(&x_new)?;
            let gfull = full_grad(&x_new, &gx);
            let true_norm = norm_sq(&gfull).sqrt();
            let fx = objective(&x_new, &gx);
            trace.record(k, src.ledger(), fx, true_norm);
            if params.certified(true_norm) {
                return Ok(report(src, x_new, fx, k + 1, trace, branch, true_norm));
            }
            verify_below = 0.5 * mapping;
        }

        let beta = if params.mu > 0.0 {
            beta_const
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let b = (t - 1.0) / t_next;
            t = t_next;
            b
        };
        y = x_new.iter().zip(&x).map(|(xn, xo)| xn + beta * (xn - xo)).collect();
        x = x_new;
    }
    Err(OptError::NoConvergence {
        solver: branch.to_string(),
        iterations: cap,
        residual: trace.last().map_or(f64::NAN, |p| p.residual),
    })
}

fn report<G: GradientSource + ?Sized>(
    src: &G,
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    trace: Trace,
    branch: Branch,
    residual: f64,
) -> SolverReport {
    SolverReport {
        x_hat: x,
        objective,
        ledger_snapshot: src.ledger().snapshot(),
        iterations,
        trace,
        branch,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracle_core::DenseMatrix;

    #[test]
    fn identity_converges_immediately() {
        let p = QuadraticProblem::from_dense(DenseMatrix::identity(5), vec![-1.0; 5]).unwrap();
        let ledger = OracleLedger::new();
        let src = QuadraticGradient::new(&p, &ledger);
        let r = accelerated_gradient(&src, &AgdParams::new(1.0, 1.0, 1e-10), &[0.0; 5]).unwrap();
        assert!(r.x_hat.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(ledger.grad_calls() <= 3);
    }

    #[test]
    fn diagonal_two_by_two() {
        let p = QuadraticProblem::from_dense(DenseMatrix::from_diag(&[4.0, 1.0]), vec![-4.0, -2.0]).unwrap();
        let ledger = OracleLedger::new();
        let src = QuadraticGradient::new(&p, &ledger);
        let eps = 1e-8;
        let r = accelerated_gradient(&src, &AgdParams::new(4.0, 1.0, eps), &[0.0; 2]).unwrap();
        assert!(dist(&r.x_hat, &[1.0, 2.0]) <= (2.0 * eps / 1.0_f64).sqrt());
    }

    #[test]
    fn zero_mu_schedule_with_radius() {
        let p = QuadraticProblem::from_dense(DenseMatrix::from_diag(&[1.0, 0.0]), vec![-1.0, 0.0]).unwrap();
        let ledger = OracleLedger::new();
        let src = QuadraticGradient::new(&p, &ledger);
        let mut params = AgdParams::new(1.0, 0.0, 1e-6);
        params.radius = Some(2.0);
        let r = accelerated_gradient(&src, &params, &[0.0; 2]).unwrap();
        assert!(r.objective <= -0.5 + 1e-6);
    }

    #[test]
    fn underestimated_l_diverges() {
        let p = QuadraticProblem::from_dense(DenseMatrix::from_diag(&[10.0, 1.0]), vec![1.0, 1.0]).unwrap();
        let ledger = OracleLedger::new();
        let src = QuadraticGradient::new(&p, &ledger);
        let err = accelerated_gradient(&src, &AgdParams::new(1.0, 1.0, 1e-8), &[0.0; 2]).unwrap_err();
        assert!(matches!(err, OptError::Divergence(_) | OptError::NonFinite(_)));
    }
}
