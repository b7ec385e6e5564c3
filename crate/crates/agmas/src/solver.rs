//! Extraction followed by branch dispatch.

use eigen_tools::{
    eigen_extract, estimate_smallest_eigenvalue, ExtractMode, Extraction, ExtractorConfig, StopCriterion,
};
use log::{debug, info};
use oracle_core::linalg::{dist, norm};
use oracle_core::{Branch, OptError, OracleLedger, QuadraticProblem, Result, SolverReport};

use crate::agd::{accelerated_gradient, accelerated_prox_gradient, AgdParams, QuadraticGradient};
use crate::cg::conjugate_gradient;
use crate::prox::LowRankProx;

#[derive(Debug, Clone)]
pub struct AgmasConfig {
    pub eps: f64,
    /// Lower bound on `lambda_min(A)`; `None` estimates it and halves the estimate.
    pub mu: Option<f64>,
    pub extractor: ExtractorConfig,
    /// Cap on restarts after a divergent accelerated run.
    pub max_outer_iters: usize,
    /// Forces a branch instead of dispatching on the fired rule.
    pub force_branch: Option<Branch>,
    /// Fraction of `mu` the extractor may leak off `lambda_min`. `None` uses the
    /// fixed per-step accuracy `(mu/2) / (100 d^2)` and momentum with `mu/2`;
    /// `Some(f)` tracks a total leak of `f mu` and uses `(1 - f) mu` in the momentum.
    pub leak_fraction: Option<f64>,
    /// Prox-AGD smoothness `L_g = factor * a_last`; doubled on divergence.
    pub smoothness_factor: f64,
}

/// Stop constant of the adaptive extraction rules under [`AgmasConfig::new`].
pub const TUNED_STOP_CONST: f64 = 0.25;
/// Leak fraction under [`AgmasConfig::new`].
pub const TUNED_LEAK_FRACTION: f64 = 0.1;
/// Prox smoothness factor under [`AgmasConfig::new`].
pub const TUNED_SMOOTHNESS: f64 = 1.5;

impl AgmasConfig {
    /// Tuned defaults: leak budget `0.1 mu`, stop constant 0.25, `L_g = 1.5 a_last`.
    pub fn new(eps: f64, mu: f64, d: usize) -> Self {
        let mut cfg = Self::literal(eps, mu, d);
        cfg.extractor.stop_const = TUNED_STOP_CONST;
        cfg.leak_fraction = Some(TUNED_LEAK_FRACTION);
        cfg.smoothness_factor = TUNED_SMOOTHNESS;
        cfg
    }

    /// Untuned constants: fixed per-step accuracy, `c = 1`, `L_g = 2 a_last`.
    pub fn literal(eps: f64, mu: f64, d: usize) -> Self {
        Self {
            eps,
            mu: Some(mu),
            extractor: ExtractorConfig::for_accuracy(eps, d),
            max_outer_iters: 8,
            force_branch: None,
            leak_fraction: None,
            smoothness_factor: 2.0,
        }
    }

    pub fn with_unknown_mu(eps: f64, d: usize) -> Self {
        Self {
            mu: None,
            ..Self::new(eps, 0.0, d)
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(OptError::InvalidParameter(format!("eps = {}", self.eps)));
        }
        if let Some(f) = self.leak_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(OptError::InvalidParameter(format!("leak_fraction = {f}")));
            }
        }
        if !(self.smoothness_factor >= 1.0) {
            return Err(OptError::InvalidParameter(format!("smoothness_factor = {}", self.smoothness_factor)));
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0) {
                return Err(OptError::InvalidParameter(format!("mu = {mu}")));
            }
        }
        self.extractor.validate(d)
    }
}

/// Branch picked from the fired rules: CG, then AGD, then prox-AGD.
pub fn dispatch(extraction: &Extraction) -> Branch {
    if extraction.has_fired(StopCriterion::DimensionCap) {
        Branch::Cg
    } else if extraction.has_fired(StopCriterion::InverseSqrtMu) {
        Branch::Agd
    } else {
        Branch::ProxAgd
    }
}

/// Minimizes `1/2 x^T A x + b^T x` to accuracy `eps` from `x = 0`.
pub fn agmas_solve(problem: &QuadraticProblem, cfg: &AgmasConfig, ledger: &OracleLedger) -> Result<SolverReport> {
    agmas_solve_from(problem, cfg, ledger, &vec![0.0; problem.dim()])
}

/// Extraction outcome and the parameters the chosen branch will run with.
#[derive(Debug, Clone)]
pub struct AgmasPlan {
    /// Strong convexity used for certificates.
    pub mu: f64,
    /// Strong convexity used in the prox-AGD momentum.
    pub mu_g: f64,
    pub extraction: Extraction,
    pub branch: Branch,
}

/// Runs the extraction phase of [`agmas_solve`] and picks the branch.
pub fn agmas_plan(problem: &QuadraticProblem, cfg: &AgmasConfig, ledger: &OracleLedger) -> Result<AgmasPlan> {
    let d = problem.dim();
    cfg.validate(d)?;
    let mu = match cfg.mu {
        Some(mu) => mu,
        None => {
            let est = estimate_smallest_eigenvalue(&problem.counted(ledger), 60, cfg.extractor.seed)
                .map_err(|e| e.context("estimating mu"))?;
            debug!("mu estimate {:.6e} verified={}", est.mu_hat, est.verified);
            0.5 * est.mu_hat
        }
    };

    let mut ext_cfg = cfg.extractor.clone();
    ext_cfg.mu_target = 0.5 * mu;
    let mu_g = match cfg.leak_fraction {
        Some(f) if mu > 0.0 => {
            ext_cfg.leak_budget = Some(f * mu);
            (1.0 - f) * mu
        }
        _ => {
            if ext_cfg.mu_target > 0.0 {
                ext_cfg.eps0 = (ext_cfg.mu_target / (100.0 * (d * d) as f64)).min(0.5);
            }
            0.5 * mu
        }
    };
    let extraction =
        eigen_extract(problem, &ext_cfg, ExtractMode::Adaptive, ledger).map_err(|e| e.context("AGMAS extraction"))?;
    let branch = cfg.force_branch.unwrap_or_else(|| dispatch(&extraction));
    info!(
        "agmas extracted rank={} steps={} fired={:?} branch={branch} calls={}",
        extraction.deflation.rank(),
        extraction.steps,
        extraction.fired,
        ledger.grad_calls()
    );
    Ok(AgmasPlan {
        mu,
        mu_g,
        extraction,
        branch,
    })
}

/// [`agmas_solve`] from a given start.
pub fn agmas_solve_from(
    problem: &QuadraticProblem,
    cfg: &AgmasConfig,
    ledger: &OracleLedger,
    x0: &[f64],
) -> Result<SolverReport> {
    let AgmasPlan {
        mu,
        mu_g,
        extraction,
        branch,
    } = agmas_plan(problem, cfg, ledger)?;
    let f_gap = f_gap_bound(problem, mu, cfg.eps);

    let out = match branch {
        Branch::Cg => {
            let bn = norm(problem.b());
            let rel = if bn > 0.0 { (2.0 * mu.max(0.0) * cfg.eps).sqrt() / bn } else { 1.0 };
            let rel = rel.max(1e-15);
            let start = if x0.iter().all(|v| *v == 0.0) { None } else { Some(x0) };
            conjugate_gradient(problem, ledger, start, rel)
        }
        Branch::Agd => {
            let src = QuadraticGradient::new(problem, ledger);
            let mut l = 2.0 * extraction.max_rayleigh().max(mu);
            with_restarts(cfg, &mut l, |l| {
                let mut p = AgdParams::new(l, mu.min(l), cfg.eps);
                p.f_gap_bound = f_gap;
                accelerated_gradient(&src, &p, x0)
            })
        }
        Branch::ProxAgd | Branch::NotApplicable => {
            let src = QuadraticGradient::deflated(problem, &extraction.deflation, ledger);
            let mut l = cfg.smoothness_factor * extraction.last_rayleigh().max(mu);
            with_restarts(cfg, &mut l, |l| {
                let prox = LowRankProx::new(&extraction.deflation, l)?;
                let mut p = AgdParams::new(l, mu_g.min(l), cfg.eps);
                p.cert_mu = mu;
                p.f_gap_bound = f_gap;
                accelerated_prox_gradient(&src, &prox, &p, x0)
            })
        }
    };
    let mut report = out.map_err(|e| e.context(format!("AGMAS {branch} branch")))?;
    report.branch = branch;
    Ok(report)
}

fn with_restarts<F>(cfg: &AgmasConfig, l: &mut f64, mut run: F) -> Result<SolverReport>
where
    F: FnMut(f64) -> Result<SolverReport>,
{
    let mut attempt = 0;
    loop {
        match run(*l) {
            Err(e @ (OptError::Divergence(_) | OptError::NonFinite(_))) if attempt < cfg.max_outer_iters => {
                debug!("restart with doubled L after: {e}");
                *l *= 2.0;
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// `f(0) - f* <= ||b||^2 / (2 mu)`.
fn f_gap_bound(problem: &QuadraticProblem, mu: f64, eps: f64) -> f64 {
    let bn = norm(problem.b());
    if mu > 0.0 {
        bn * bn / (2.0 * mu)
    } else {
        bn * bn / (2.0 * eps)
    }
}

/// Minimizes a possibly singular PSD quadratic to accuracy `eps` by the proximal
/// point method: each step solves `f(x) + (rho/2) ||x - x_t||^2` with AGMAS,
/// `rho = eps`, warm-started at `x_t`.
///
/// Stops when the gradient bound `||grad f(x_{t+1})|| <= r_inner + rho ||x_{t+1} - x_t||`
/// times the distance proxy `2 max_t ||x_t - x_0||` is at most `eps / 2`.
pub fn solve_to_eps_nonstrongly(
    problem: &QuadraticProblem,
    eps: f64,
    mu: f64,
    ledger: &OracleLedger,
    max_outer: usize,
) -> Result<SolverReport> {
    if !(eps > 0.0) {
        return Err(OptError::InvalidParameter(format!("eps = {eps}")));
    }
    let d = problem.dim();
    let rho = eps;
    let x0 = vec![0.0; d];
    let mut x = x0.clone();
    let mut radius = 0.0_f64;
    let mut trace = oracle_core::Trace::new();
    let mut last: Option<SolverReport> = None;
    for t in 0..max_outer.max(1) {
        let shifted = regularized(problem, rho, &x)?;
        let mut cfg = AgmasConfig::new(eps / 4.0, mu + rho, d);
        cfg.extractor.seed = t as u64;
        let rep = agmas_solve_from(&shifted, &cfg, ledger, &x).map_err(|e| e.context(format!("proximal step {t}")))?;
        let step = dist(&rep.x_hat, &x);
        x = rep.x_hat.clone();
        radius = radius.max(dist(&x, &x0));
        trace.extend(&rep.trace);
        let grad_bound = rep.residual + rho * step;
        debug!("prox-point t={t} step={step:.3e} grad_bound={grad_bound:.3e} radius={radius:.3e}");
        last = Some(rep);
        if grad_bound * 2.0 * radius <= 0.5 * eps || grad_bound == 0.0 {
            break;
        }
    }
    let rep = last.expect("at least one proximal step");
    Ok(SolverReport {
        objective: problem.objective(&x),
        x_hat: x,
        ledger_snapshot: ledger.snapshot(),
        iterations: trace.len(),
        trace,
        branch: rep.branch,
        residual: rep.residual,
    })
}

/// `1/2 x^T (A + rho I) x + (b - rho c)^T x`.
fn regularized(problem: &QuadraticProblem, rho: f64, center: &[f64]) -> Result<QuadraticProblem> {
    let b: Vec<f64> = problem.b().iter().zip(center).map(|(bi, ci)| bi - rho * ci).collect();
    let op = std::sync::Arc::new(oracle_core::Shifted::new(problem.operator().clone(), 1.0, rho));
    QuadraticProblem::new(op, b)
}
