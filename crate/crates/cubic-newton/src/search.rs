//! The regularized subproblem and the radius search around it.

use std::sync::Arc;

use agmas::{agmas_solve_from, AgmasConfig};
use eigen_tools::find_smallest_eigenvalue_at;
use log::debug;
use oracle_core::linalg::{add, dist};
use oracle_core::{regularized_model, CountingOracle, OptError, OracleLedger, Result, SecondOrderOracle};

use crate::config::CubicConfig;

/// `argmin_y f_x(y) + (a_reg/4) ||y - x||^2` to accuracy `eps_b`.
///
/// `mu` is a lower bound on `λ_min(∇²f(x)) + a_reg/2`. Each operator product is
/// charged as a gradient call.
#[allow(clippy::too_many_arguments)]
pub fn cubic_subproblem(
    oracle: &Arc<dyn SecondOrderOracle>,
    x: &[f64],
    grad: &[f64],
    a_reg: f64,
    mu: f64,
    eps_b: f64,
    ledger: &OracleLedger,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(a_reg >= 0.0 && a_reg.is_finite()) {
        return Err(OptError::InvalidParameter(format!("a_reg = {a_reg}")));
    }
    if !(mu > 0.0) {
        return Err(OptError::InvalidParameter(format!("mu = {mu}")));
    }
    let d = x.len();
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(x.to_vec());
    }
    let problem = regularized_model(oracle.clone(), x, grad.to_vec(), 0.5 * a_reg)?;
    let mut cfg = AgmasConfig::new(eps_b, mu, d);
    cfg.extractor.seed = seed;
    let rep = agmas_solve_from(&problem, &cfg, ledger, &vec![0.0; d]).map_err(|e| match e.root() {
        OptError::Divergence(_) | OptError::NonFinite(_) => {
            OptError::NegativeCurvature(format!("cubic subproblem with a_reg = {a_reg:e} (bracket too small): {e}"))
        }
        _ => e.context(format!("cubic subproblem with a_reg = {a_reg:e}")),
    })?;
    Ok(add(x, &rep.x_hat))
}

/// Bracket of the radius search at the moment it returned.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicState {
    pub l: f64,
    pub u: f64,
    pub r_temp: f64,
    pub lambda_min_est: f64,
}

/// One outer step: the new point and `r = ||y - x||`.
#[derive(Debug, Clone)]
pub struct CubicStep {
    pub y: Vec<f64>,
    pub r: f64,
    pub state: CubicState,
    /// Lower edge `max{0, -2 lambda/H} + (5c1+2c2) sqrt(eps/H)` of the first bracket.
    pub l_initial: f64,
    pub probes: usize,
    /// Set when the bisection cap was hit and the best short probe was returned.
    pub capped: bool,
}

struct Prober<'a> {
    oracle: &'a Arc<dyn SecondOrderOracle>,
    x: &'a [f64],
    grad: &'a [f64],
    cfg: &'a CubicConfig,
    eps_b: f64,
    lambda: f64,
    ledger: &'a OracleLedger,
    count: usize,
}

impl Prober<'_> {
    fn probe(&mut self, r: f64) -> Result<(Vec<f64>, f64)> {
        self.count += 1;
        let a_reg = self.cfg.h * r;
        let sh = self.cfg.curvature_unit();
        let mu = (self.cfg.c2 * sh).max(0.5 * a_reg + self.lambda - 0.5 * self.cfg.c1 * sh);
        let seed = self.cfg.seed.wrapping_add(self.count as u64);
        let y = cubic_subproblem(self.oracle, self.x, self.grad, a_reg, mu, self.eps_b, self.ledger, seed)?;
        let rho = dist(&y, self.x);
        debug!("cubic probe={} r={r:.4e} step={rho:.4e}", self.count);
        Ok((y, rho))
    }
}

fn k_cap(cfg: &CubicConfig, u: f64, l: f64, margin: f64) -> usize {
    cfg.k_cap
        .unwrap_or_else(|| ((u - l) / margin).log2().ceil().max(0.0) as usize + 2)
}

/// Radius search at `x`: doubles the probe radius from the lower edge until a
/// probe lands short, then bisects on `[u/2, u]` for a step inside
/// `[l + c2 sqrt(eps/H), r_temp - c2 sqrt(eps/H)]`.
pub fn c_cubic_binary_search(
    oracle: &Arc<dyn SecondOrderOracle>,
    x: &[f64],
    cfg: &CubicConfig,
    eps_b: f64,
    ledger: &OracleLedger,
) -> Result<CubicStep> {
    let counted = CountingOracle::new(&**oracle, ledger);
    let grad = counted.grad(x)?;
    let lambda = find_smallest_eigenvalue_at(&counted, x, 0.5 * cfg.c1 * cfg.curvature_unit(), cfg.seed)
        .map_err(|e| e.context("cubic search: smallest eigenvalue"))?
        .lambda_hat;
    let margin = cfg.c2 * cfg.radius_unit();
    let l0 = (-2.0 * lambda / cfg.h).max(0.0) + (5.0 * cfg.c1 + 2.0 * cfg.c2) * cfg.radius_unit();
    let mut prober = Prober {
        oracle,
        x,
        grad: &grad,
        cfg,
        eps_b,
        lambda,
        ledger,
        count: 0,
    };
    let step = |y: Vec<f64>, r: f64, state: CubicState, probes: usize, capped: bool| CubicStep {
        y,
        r,
        state,
        l_initial: l0,
        probes,
        capped,
    };

    let mut r_temp = l0;
    let mut short = None;
    for _ in 0..cfg.max_doublings {
        let (y, rho) = prober.probe(r_temp)?;
        if rho <= r_temp - margin {
            short = Some((y, rho));
            break;
        }
        r_temp *= 2.0;
    }
    let Some((y, rho)) = short else {
        return Err(OptError::NoConvergence {
            solver: "cubic radius doubling".into(),
            iterations: cfg.max_doublings,
            residual: r_temp,
        });
    };
    let mut u = r_temp;
    if u == l0 {
        let state = CubicState {
            l: l0,
            u,
            r_temp,
            lambda_min_est: lambda,
        };
        return Ok(step(y, rho, state, prober.count, false));
    }

    // Best short probe so far; every short probe is a descent step.
    let mut best = (y, rho, r_temp);
    let mut l = l0;
    for _ in 0..cfg.max_rounds {
        l = (0.5 * u).max(l0);
        let mut l_temp = l;
        let cap = k_cap(cfg, u, l, margin);
        for _ in 0..=cap {
            r_temp = 0.5 * (u + l_temp);
            let (y, rho) = prober.probe(r_temp)?;
            if rho > r_temp - margin {
                l_temp = r_temp;
            } else if rho < l + margin {
                u = r_temp;
                best = (y, rho, r_temp);
            } else {
                let state = CubicState {
                    l,
                    u,
                    r_temp,
                    lambda_min_est: lambda,
                };
                return Ok(step(y, rho, state, prober.count, false));
            }
        }
    }
    debug!("cubic search capped after {} probes; returning best short probe", prober.count);
    let (y, rho, r_best) = best;
    let state = CubicState {
        l,
        u,
        r_temp: r_best,
        lambda_min_est: lambda,
    };
    Ok(step(y, rho, state, prober.count, true))
}
