//! Outer A-NPE loop and the step-size search.

use std::sync::Arc;

use log::{debug, info};
use oracle_core::linalg::{add, axpy, dist, lincomb, norm, scaled, sub};
use oracle_core::{
    Branch, CountingOracle, OptError, OracleLedger, Result, SecondOrderOracle, SolverReport, Trace,
};

use crate::model::{anpe_subproblem, eps_a_threshold, local_model};

#[derive(Debug, Clone)]
pub struct AnpeConfig {
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub sigma: f64,
    /// Hessian-Lipschitz constant.
    pub h: f64,
    /// Bound on the distance to a minimizer; `None` tracks `2 max ||x0 - x_best||`.
    pub diameter: Option<f64>,
    /// Initial step; `None` uses `sigma_l sqrt(1 - sigma^2) / (16 D H)`.
    pub gamma0: Option<f64>,
    pub eps: f64,
    pub max_iters: usize,
    /// Cap on probes per step-size search.
    pub max_search: usize,
    pub seed: u64,
}

impl AnpeConfig {
    pub fn new(h: f64, eps: f64) -> Self {
        Self {
            sigma_l: 0.2,
            sigma_u: 0.4,
            sigma: 0.5,
            h,
            diameter: None,
            gamma0: None,
            eps,
            max_iters: 200,
            max_search: 200,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OptError::InvalidParameter(m));
        if !(0.0 < self.sigma_l && self.sigma_l < self.sigma_u && self.sigma_u < self.sigma && self.sigma < 1.0) {
            return bad(format!(
                "need 0 < sigma_l < sigma_u < sigma < 1, got {} {} {}",
                self.sigma_l, self.sigma_u, self.sigma
            ));
        }
        if (self.sigma_l - 0.5 * self.sigma_u).abs() > 1e-12 * self.sigma_u {
            return bad(format!("sigma_l must equal sigma_u / 2, got {} and {}", self.sigma_l, self.sigma_u));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("H = {}", self.h));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps = {}", self.eps));
        }
        if let Some(d) = self.diameter {
            if !(d > 0.0) {
                return bad(format!("diameter = {d}"));
            }
        }
        if let Some(g) = self.gamma0 {
            if !(g > 0.0) {
                return bad(format!("gamma0 = {g}"));
            }
        }
        Ok(())
    }

    /// `sigma_l sqrt(1 - sigma^2) / (16 D H)`.
    pub fn gamma_from_diameter(&self, diameter: f64) -> f64 {
        self.sigma_l * (1.0 - self.sigma * self.sigma).sqrt() / (16.0 * diameter * self.h)
    }

    /// Lower edge `2 sigma_l / H` of the step window.
    pub fn window_low(&self) -> f64 {
        2.0 * self.sigma_l / self.h
    }

    /// Upper edge `2 sigma_u / H` of the step window.
    pub fn window_high(&self) -> f64 {
        2.0 * self.sigma_u / self.h
    }
}

/// The outer iterate: `A_k`, `x_k`, `y_k` and the current step `gamma_k`.
#[derive(Debug, Clone)]
pub struct AnpeState {
    pub a_sum: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gamma: f64,
}

impl AnpeState {
    pub fn new(x0: &[f64], gamma0: f64) -> Self {
        Self {
            a_sum: 0.0,
            x: x0.to_vec(),
            y: x0.to_vec(),
            gamma: gamma0,
        }
    }

    /// `x~ = A/(A+a) y + a/(A+a) x`.
    pub fn extrapolate(&self, a: f64) -> Vec<f64> {
        let t = self.a_sum + a;
        lincomb(self.a_sum / t, &self.y, a / t, &self.x)
    }
}

/// Positive root of `a^2 = gamma (A + a)`.
pub fn next_coefficient(gamma: f64, a_sum: f64) -> f64 {
    0.5 * (gamma + (gamma * gamma + 4.0 * gamma * a_sum).sqrt())
}

/// An accepted step of the search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub y: Vec<f64>,
    pub a: f64,
    pub gamma: f64,
    pub x_tilde: Vec<f64>,
    /// `gamma ||y - x~||`, inside `[2 sigma_l / H, 2 sigma_u / H]`.
    pub window_value: f64,
    pub probes: usize,
}

/// Finds `gamma` with `2 sigma_l / H <= gamma ||y - x~|| <= 2 sigma_u / H`.
///
/// Doubles or halves `gamma` as the listing prescribes until both a too-short and
/// a too-long probe have been seen, then bisects geometrically between them.
pub fn c_binary_search(
    oracle: &Arc<dyn SecondOrderOracle>,
    state: &AnpeState,
    cfg: &AnpeConfig,
    ledger: &OracleLedger,
) -> Result<SearchOutcome> {
    let counted = CountingOracle::new(&**oracle, ledger);
    let (lo, hi) = (cfg.window_low(), cfg.window_high());
    let mut gamma = state.gamma;
    let mut too_short: Option<f64> = None;
    let mut too_long: Option<f64> = None;
    let mut cached: Option<(Vec<f64>, Vec<f64>)> = None;
    for probe in 1..=cfg.max_search {
        let a = next_coefficient(gamma, state.a_sum);
        let x_tilde = state.extrapolate(a);
        let grad = match &cached {
            Some((x, g)) if *x == x_tilde => g.clone(),
            _ => {
                let g = counted.grad(&x_tilde)?;
                cached = Some((x_tilde.clone(), g.clone()));
                g
            }
        };
        let local = local_model(&counted, &x_tilde, &grad, gamma, cfg.seed.wrapping_add(probe as u64))?;
        let eps_a = eps_a_threshold(gamma, local.l_local, cfg.sigma, cfg.sigma_u, local.gap_proxy);
        if eps_a.stalled {
            debug!("anpe probe={probe} zero gap proxy at gamma={gamma:.3e}");
        }
        let y = anpe_subproblem(oracle, &x_tilde, &grad, gamma, eps_a.value, ledger, Some(&local.damped_step), cfg.seed)?;
        let value = gamma * dist(&y, &x_tilde);
        debug!("anpe probe={probe} gamma={gamma:.4e} window={value:.4e} in [{lo:.3e}, {hi:.3e}] eps_a={:.3e}", eps_a.value);
        if value <= lo && !eps_a.stalled {
            too_short = Some(too_short.map_or(gamma, |g: f64| g.max(gamma)));
        } else if value >= hi {
            too_long = Some(too_long.map_or(gamma, |g: f64| g.min(gamma)));
        } else {
            return Ok(SearchOutcome {
                y,
                a,
                gamma,
                x_tilde,
                window_value: value,
                probes: probe,
            });
        }
        gamma = match (too_short, too_long) {
            (Some(s), Some(l)) => (s * l).sqrt(),
            (Some(_), None) => 2.0 * gamma,
            (None, Some(_)) => 0.5 * gamma,
            (None, None) => {
                // A zero gradient at x~: every step is acceptable.
                return Ok(SearchOutcome {
                    y,
                    a,
                    gamma,
                    x_tilde,
                    window_value: value,
                    probes: probe,
                });
            }
        };
    }
    Err(OptError::NoConvergence {
        solver: "A-NPE step search (window never reached; check H)".into(),
        iterations: cfg.max_search,
        residual: f64::NAN,
    })
}

/// One accepted outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AnpeIterate {
    pub k: usize,
    /// `A_k` after the update.
    pub a_sum: f64,
    pub a: f64,
    pub gamma: f64,
    pub f_y: f64,
    /// `gamma ||y_k - x~||`.
    pub window_value: f64,
    /// `||gamma ∇f(y_k) + y_k - x~|| / ||y_k - x~||`, at most `sigma` when the step is valid.
    pub inexactness: f64,
    pub probes: usize,
}

#[derive(Debug, Clone)]
pub struct AnpeReport {
    pub report: SolverReport,
    pub iterates: Vec<AnpeIterate>,
    pub gamma0: f64,
    /// Diameter used by the stopping rule at exit.
    pub diameter: f64,
}

/// Inexact large-step A-NPE from `x0`; stops once `A_k >= D^2 / eps` or after `max_iters`.
pub fn anpe_solve(
    oracle: &Arc<dyn SecondOrderOracle>,
    x0: &[f64],
    cfg: &AnpeConfig,
    ledger: &OracleLedger,
) -> Result<AnpeReport> {
    cfg.validate()?;
    if x0.len() != oracle.dim() {
        return Err(OptError::DimensionMismatch {
            expected: oracle.dim(),
            got: x0.len(),
        });
    }
    let counted = CountingOracle::new(&**oracle, ledger);
    let mut diameter = match cfg.diameter {
        Some(d) => d,
        None => {
            let g0 = counted.grad(x0)?;
            let local = local_model(&counted, x0, &g0, 1.0, cfg.seed)?;
            (2.0 * norm(&g0) / local.l_local).max(f64::MIN_POSITIVE)
        }
    };
    let gamma0 = cfg.gamma0.unwrap_or_else(|| cfg.gamma_from_diameter(diameter));
    let mut state = AnpeState::new(x0, gamma0);
    let mut best = (oracle.value(x0), x0.to_vec());
    let mut iterates = Vec::new();
    let mut trace = Trace::new();
    trace.record(0, ledger, best.0, f64::NAN);

    for k in 1..=cfg.max_iters {
        if state.a_sum >= diameter * diameter / cfg.eps {
            break;
        }
        let step = c_binary_search(oracle, &state, cfg, ledger).map_err(|e| e.context(format!("A-NPE iteration {k}")))?;
        let v = counted.grad(&step.y)?;
        let a_sum = state.a_sum + step.a;
        axpy(-step.a, &v, &mut state.x);
        let r = sub(&step.y, &step.x_tilde);
        let residual = add(&scaled(step.gamma, &v), &r);
        let rn = norm(&r);
        let f_y = oracle.value(&step.y);
        iterates.push(AnpeIterate {
            k,
            a_sum,
            a: step.a,
            gamma: step.gamma,
            f_y,
            window_value: step.window_value,
            inexactness: if rn > 0.0 { norm(&residual) / rn } else { 0.0 },
            probes: step.probes,
        });
        trace.record(k, ledger, f_y, norm(&v));
        info!(
            "anpe k={k} A={a_sum:.4e} gamma={:.4e} f={f_y:.10e} probes={} grad_calls={}",
            step.gamma,
            step.probes,
            ledger.grad_calls()
        );
        if f_y < best.0 {
            best = (f_y, step.y.clone());
        }
        if cfg.diameter.is_none() {
            diameter = diameter.max(2.0 * dist(x0, &best.1));
        }
        state.a_sum = a_sum;
        state.y = step.y;
        state.gamma = step.gamma;
    }

    let objective = oracle.value(&state.y);
    let residual = trace.last().map_or(f64::NAN, |p| p.residual);
    Ok(AnpeReport {
        report: SolverReport {
            x_hat: state.y,
            objective,
            ledger_snapshot: ledger.snapshot(),
            iterations: iterates.len(),
            trace,
            branch: Branch::NotApplicable,
            residual,
        },
        iterates,
        gamma0,
        diameter,
    })
}
