//! Adaptive eigen extraction by repeated partial deflation.
//!
//! Each step finds an approximate leading eigenvector `v_k` of the current
//! operator `A_k`, records `a_k = v_k^T A_k v_k` and deflates
//! `A_{k+1} = A_k - (a_k / 5) v_k v_k^T`. Removing only a fifth of the
//! Rayleigh value keeps every `A_k` positive semidefinite up to the per-step
//! leakage `eps0`, while repeated hits on a direction shrink it by `4/5` each.

use log::debug;
use oracle_core::{Deflated, DEFLATION_SCALE, LinearOperator, LowRankDeflation, OptError, OracleLedger, QuadraticProblem, Result};

use crate::leading::{leading_eigenvector, LeadingSolver};

/// Default step cap is this many times `d`. A direction is hit about
/// `log_{5/4}(a_1 / (4 lambda_l))` times before it falls to the level, so a cap
/// of `d` would cut off spiked spectra in small dimension.
pub const RANK_CAP_FACTOR: usize = 64;

/// Threshold factor of the level criterion: stop once `a_k <= 4 lambda_l`.
pub const LEVEL_FACTOR: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct ExtractorConfig {
    /// Relative gap parameter of each leading-vector solve.
    pub delta: f64,
    /// Per-step leakage budget.
    pub eps0: f64,
    /// Strong-convexity level used by the adaptive stopping rules.
    pub mu_target: f64,
    /// Constant `c` in the adaptive stopping rules.
    pub stop_const: f64,
    pub max_rank: usize,
    pub solver: LeadingSolver,
    pub seed: u64,
    /// Total allowed drop of `lambda_min` across all steps. When set, every step
    /// after the first sizes its accuracy from this budget instead of `eps0`.
    pub leak_budget: Option<f64>,
}

impl ExtractorConfig {
    /// Defaults for accuracy `eps` in dimension `d`: `delta = 1/2`,
    /// `eps0 = eps / (100 d^2)`, `mu_target = eps`, `c = 1`, step cap `64 d`.
    pub fn for_accuracy(eps: f64, d: usize) -> Self {
        let d = d.max(1);
        Self {
            delta: 0.5,
            eps0: (eps / (100.0 * (d * d) as f64)).min(0.5),
            mu_target: eps,
            stop_const: 1.0,
            max_rank: RANK_CAP_FACTOR * d,
            solver: LeadingSolver::CertifiedPower,
            seed: 0,
            leak_budget: None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(OptError::InvalidParameter(format!("delta = {}", self.delta)));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(OptError::InvalidParameter(format!("eps0 = {}", self.eps0)));
        }
        if !(self.mu_target >= 0.0) {
            return Err(OptError::InvalidParameter(format!("mu_target = {}", self.mu_target)));
        }
        if !(self.stop_const > 0.0) {
            return Err(OptError::InvalidParameter(format!("stop_const = {}", self.stop_const)));
        }
        if let Some(b) = self.leak_budget {
            if !(b > 0.0) {
                return Err(OptError::InvalidParameter(format!("leak_budget = {b}")));
            }
        }
        if self.max_rank == 0 || self.max_rank > RANK_CAP_FACTOR * d.max(1) {
            return Err(OptError::InvalidParameter(format!("max_rank = {} with d = {d}", self.max_rank)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtractMode {
    /// Stop once the Rayleigh value drops to `4 lambda_l`.
    TargetLevel { lambda_l: f64 },
    /// Stop on the first of the three adaptive rules.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopCriterion {
    /// `a_k <= 4 lambda_l` (target mode).
    LevelReached,
    /// `k >= c sqrt(a_k / mu)`.
    RayleighBalance,
    /// `k >= c d`.
    DimensionCap,
    /// `k >= c mu^{-1/2}`.
    InverseSqrtMu,
    /// Rank cap reached with no rule firing; the deflation is partial.
    RankCap,
}

/// Output of [`eigen_extract`].
#[derive(Debug, Clone)]
pub struct Extraction {
    pub deflation: LowRankDeflation,
    /// Every rule that held at the final step.
    pub fired: Vec<StopCriterion>,
    /// Rayleigh values `a_1, ..., a_k` in extraction order, including any value
    /// that was too small to deflate.
    pub rayleighs: Vec<f64>,
    pub steps: usize,
}

impl Extraction {
    pub fn last_rayleigh(&self) -> f64 {
        self.rayleighs.last().copied().unwrap_or(0.0)
    }

    pub fn max_rayleigh(&self) -> f64 {
        self.rayleighs.iter().fold(0.0_f64, |m, &a| m.max(a))
    }

    pub fn is_partial(&self) -> bool {
        self.fired == [StopCriterion::RankCap]
    }

    pub fn has_fired(&self, c: StopCriterion) -> bool {
        self.fired.contains(&c)
    }
}

/// Runs the extractor on an operator whose products are already being charged.
pub fn eigen_extract_op<O: LinearOperator + ?Sized>(op: &O, cfg: &ExtractorConfig, mode: ExtractMode) -> Result<Extraction> {
    let d = op.dim();
    cfg.validate(d)?;
    if let ExtractMode::TargetLevel { lambda_l } = mode {
        if !(lambda_l > 0.0) {
            return Err(OptError::InvalidParameter(format!("lambda_l must be positive, got {lambda_l}")));
        }
    }
    let mut deflation = LowRankDeflation::empty(d);
    let mut rayleighs = Vec::new();
    let step_cap = step_cap(d, cfg, mode) as f64;
    let mut step_eps = cfg.eps0;
    let mut k = 0usize;
    loop {
        k += 1;
        let current = Deflated::new(op, &deflation);
        let lead = leading_eigenvector(&current, cfg.delta, step_eps, cfg.solver, cfg.seed.wrapping_add(k as u64))
            .map_err(|e| e.context(format!("eigen extractor step {k}")))?;
        let a = lead.rayleigh;
        if let (1, Some(budget)) = (k, cfg.leak_budget) {
            // A step leaks at most (2 a_k / 5) * eps_k, and a_k <= lambda_1 <= a_1 / (1 - delta).
            let a_bound = a / ((1.0 - cfg.delta) * (1.0 - cfg.eps0));
            if a_bound > 0.0 {
                step_eps = (budget / (2.0 * DEFLATION_SCALE * a_bound * step_cap)).min(0.25).max(cfg.eps0);
            }
        }
        rayleighs.push(a);
        if a > 0.0 {
            deflation.push(a, lead.vector)?;
        }
        let fired = fired_criteria(k, a.max(0.0), d, cfg, mode);
        debug!("extract step={k} a={a:.6e} fired={fired:?}");
        if !fired.is_empty() {
            return Ok(Extraction {
                deflation,
                fired,
                rayleighs,
                steps: k,
            });
        }
        if deflation.rank() >= cfg.max_rank || k >= cfg.max_rank {
            return Ok(Extraction {
                deflation,
                fired: vec![StopCriterion::RankCap],
                rayleighs,
                steps: k,
            });
        }
    }
}

/// Runs the extractor on `A` of a quadratic problem, charging one gradient call per product.
pub fn eigen_extract(
    problem: &QuadraticProblem,
    cfg: &ExtractorConfig,
    mode: ExtractMode,
    ledger: &OracleLedger,
) -> Result<Extraction> {
    eigen_extract_op(&problem.counted(ledger), cfg, mode)
}

/// Upper bound on the number of steps before some rule must fire.
fn step_cap(d: usize, cfg: &ExtractorConfig, mode: ExtractMode) -> usize {
    let mut cap = cfg.max_rank;
    if mode == ExtractMode::Adaptive {
        cap = cap.min((cfg.stop_const * d as f64).ceil() as usize);
        if cfg.mu_target > 0.0 {
            cap = cap.min((cfg.stop_const / cfg.mu_target.sqrt()).ceil() as usize);
        }
    }
    cap.max(1)
}

fn fired_criteria(k: usize, a: f64, d: usize, cfg: &ExtractorConfig, mode: ExtractMode) -> Vec<StopCriterion> {
    let kf = k as f64;
    let c = cfg.stop_const;
    let mut fired = Vec::new();
    match mode {
        ExtractMode::TargetLevel { lambda_l } => {
            if a <= LEVEL_FACTOR * lambda_l {
                fired.push(StopCriterion::LevelReached);
            }
        }
        ExtractMode::Adaptive => {
            let mu = cfg.mu_target;
            if (mu > 0.0 && kf >= c * (a / mu).sqrt()) || a == 0.0 {
                fired.push(StopCriterion::RayleighBalance);
            }
            if kf >= c * d as f64 {
                fired.push(StopCriterion::DimensionCap);
            }
            if mu > 0.0 && kf >= c / mu.sqrt() {
                fired.push(StopCriterion::InverseSqrtMu);
            }
        }
    }
    fired
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracle_core::{dense_eigendecomposition, DenseMatrix};

    #[test]
    fn flat_spectrum_stops_after_one_vector() {
        let p = QuadraticProblem::from_dense(DenseMatrix::identity(6), vec![0.0; 6]).unwrap();
        let cfg = ExtractorConfig::for_accuracy(1e-3, 6);
        let ledger = OracleLedger::new();
        let out = eigen_extract(&p, &cfg, ExtractMode::TargetLevel { lambda_l: 1.0 }, &ledger).unwrap();
        assert_eq!(out.deflation.rank(), 1);
        assert_eq!(out.fired, vec![StopCriterion::LevelReached]);
        assert!((out.rayleighs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_spikes_are_peeled_to_the_level() {
        let mut diag = vec![0.01; 100];
        diag[0] = 10.0;
        diag[1] = 10.0;
        let p = QuadraticProblem::from_dense(DenseMatrix::from_diag(&diag), vec![0.0; 100]).unwrap();
        let cfg = ExtractorConfig::for_accuracy(1e-3, 100);
        let ledger = OracleLedger::new();
        let out = eigen_extract(&p, &cfg, ExtractMode::TargetLevel { lambda_l: 0.01 }, &ledger).unwrap();
        let mut rest = DenseMatrix::from_diag(&diag);
        rest.add_scaled(-1.0, &out.deflation.to_dense());
        let eig = dense_eigendecomposition(&rest).unwrap();
        assert!(eig.max() <= 0.08, "||A - A1|| = {}", eig.max());
        assert!(eig.min() >= 0.01 - 1e-3);
        // Each hit removes a fifth: log_{5/4}(10 / 0.08) is about 22 per spike.
        let r = out.deflation.rank();
        assert!((36..=60).contains(&r), "rank {r}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExtractorConfig::for_accuracy(1e-3, 4);
        assert!(cfg.validate(4).is_ok());
        cfg.max_rank = 257;
        assert!(cfg.validate(4).is_err());
        cfg.max_rank = 0;
        assert!(cfg.validate(4).is_err());
        cfg.max_rank = 4;
        cfg.delta = 1.0;
        assert!(cfg.validate(4).is_err());
    }
}
