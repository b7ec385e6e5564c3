//! Katyusha on the deflated components, plus a full-gradient AGD baseline.

use agmas::LowRankProx;
use log::{debug, info, warn};
use oracle_core::linalg::{axpy, dot, lincomb, norm, norm_sq, sub};
use oracle_core::rng::seeded_rng;
use oracle_core::{Branch, OptError, OracleLedger, Result, SolverReport, Trace};
use rand::Rng;

use crate::batches::BatchDeflationSet;
use crate::dataset::RegressionDataset;

#[derive(Debug, Clone)]
pub struct KatyushaConfig {
    /// Target `F(x) - F*`.
    pub eps: f64,
    /// Component smoothness; `None` uses twice the larger of the target level and the last Rayleigh values.
    pub l_bar: Option<f64>,
    /// Inner steps per epoch; `None` uses `2m`.
    pub epoch_len: Option<usize>,
    pub max_epochs: usize,
    /// Restarts with doubled smoothness after divergence.
    pub max_restarts: usize,
    pub seed: u64,
}

impl KatyushaConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            l_bar: None,
            epoch_len: None,
            max_epochs: 100_000,
            max_restarts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ErmReport {
    pub report: SolverReport,
    pub epochs: usize,
    pub l_bar: f64,
    pub restarts: usize,
    pub total_rank: usize,
}

/// Pieces of the split `F = (1/m) sum_i g_i + psi` with
/// `g_i = f_i - 1/2 x^T A_i x` and `psi = x^T (sum_i A_i) x / (2m) + (mu/2) ||x||^2`.
struct Split<'a> {
    data: &'a RegressionDataset,
    set: &'a BatchDeflationSet,
    weight: f64,
}

impl Split<'_> {
    /// `∇g_i(x) - ∇g_i(y) = (H_i - A_i)(x - y)`: one read per batch row.
    fn component_difference(&self, i: usize, x: &[f64], y: &[f64], ledger: &OracleLedger) -> Vec<f64> {
        let diff = sub(x, y);
        let mut out = vec![0.0; diff.len()];
        self.data.normal_apply_add(self.set.batches[i].clone(), self.weight, &diff, &mut out, ledger);
        self.set.deflations[i].apply_add(-1.0, &diff, &mut out);
        out
    }

    /// `(1/m) sum_i ∇g_i(x)` and `∇F(x)`; reads every row once.
    fn full_gradients(&self, x: &[f64], combined: &oracle_core::LowRankDeflation, ledger: &OracleLedger) -> (Vec<f64>, Vec<f64>) {
        let m = self.set.m() as f64;
        let mut smooth = vec![0.0; x.len()];
        self.data
            .residual_grad_add(0..self.data.n(), 1.0 / self.data.n() as f64, x, &mut smooth, ledger);
        combined.apply_add(-1.0 / m, x, &mut smooth);
        let mut full = smooth.clone();
        combined.apply_add(1.0 / m, x, &mut full);
        axpy(self.data.mu, x, &mut full);
        (smooth, full)
    }
}

/// `argmin_y psi(y) + 1/(2 eta) ||y - z||^2` with `psi` as in [`Split`].
struct PsiProx {
    inner: LowRankProx,
    shrink: f64,
}

impl PsiProx {
    fn new(scaled: &oracle_core::LowRankDeflation, mu: f64, eta: f64) -> Result<Self> {
        Ok(Self {
            inner: LowRankProx::new(scaled, mu + 1.0 / eta)?,
            shrink: 1.0 / (1.0 + eta * mu),
        })
    }

    fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let y: Vec<f64> = z.iter().map(|v| v * self.shrink).collect();
        self.inner.apply(&y)
    }
}

/// Default component smoothness from the extraction: `2 max(target, max_i a_last_i)`.
pub fn default_l_bar(set: &BatchDeflationSet) -> f64 {
    let top = set
        .last_rayleigh
        .iter()
        .filter(|a| a.is_finite())
        .fold(set.target_level, |m, &a| m.max(a));
    2.0 * top
}

/// Strongly convex Katyusha (Option I) with `tau_2 = 1/2`, `tau_1 = min(sqrt(m mu / (3L)), 1/2)`,
/// `alpha = 1/(3 tau_1 L)`. Stops at a snapshot with `||∇F||^2 <= 2 mu eps`.
pub fn katyusha_solve(
    data: &RegressionDataset,
    set: &BatchDeflationSet,
    cfg: &KatyushaConfig,
    ledger: &OracleLedger,
) -> Result<ErmReport> {
    let mu = data.mu;
    if !(mu > 0.0) {
        return Err(OptError::InvalidParameter("Katyusha needs mu > 0".into()));
    }
    if !(cfg.eps > 0.0) {
        return Err(OptError::InvalidParameter(format!("eps = {}", cfg.eps)));
    }
    let m = set.m();
    let d = data.d();
    let split = Split {
        data,
        set,
        weight: m as f64 / data.n() as f64,
    };
    let combined = set.combined(d);
    let scaled = combined.scaled(1.0 / m as f64);
    let mut l_bar = cfg.l_bar.unwrap_or_else(|| default_l_bar(set));
    let epoch_len = cfg.epoch_len.unwrap_or(2 * m).max(1);
    let x0 = vec![0.0; d];
    let target = 2.0 * mu * cfg.eps;
    let mut rng = seeded_rng(cfg.seed);

    let mut restarts = 0;
    'restart: loop {
        let tau1 = (m as f64 * mu / (3.0 * l_bar)).sqrt().min(0.5);
        let tau2 = 0.5;
        let alpha = 1.0 / (3.0 * tau1 * l_bar);
        let z_prox = PsiProx::new(&scaled, mu, alpha)?;
        let y_prox = PsiProx::new(&scaled, mu, 1.0 / (3.0 * l_bar))?;
        let growth = 1.0 + alpha * mu;

        let mut trace = Trace::new();
        let mut snapshot = x0.clone();
        let (mut snap_grad, full) = split.full_gradients(&snapshot, &combined, ledger);
        let g0 = norm(&full);
        trace.record(0, ledger, data.objective(&snapshot), g0);
        let (mut y, mut z) = (x0.clone(), x0.clone());
        let mut residual = g0;
        for epoch in 1..=cfg.max_epochs {
            if residual * residual <= target {
                info!("katyusha converged: epochs={} accesses={}", epoch - 1, ledger.data_accesses());
                return Ok(ErmReport {
                    report: SolverReport {
                        objective: data.objective(&snapshot),
                        x_hat: snapshot,
                        ledger_snapshot: ledger.snapshot(),
                        iterations: epoch - 1,
                        trace,
                        branch: Branch::NotApplicable,
                        residual,
                    },
                    epochs: epoch - 1,
                    l_bar,
                    restarts,
                    total_rank: set.total_rank(),
                });
            }
            let mut avg = vec![0.0; d];
            let (mut wsum, mut w) = (0.0, 1.0);
            for _ in 0..epoch_len {
                let x = {
                    let mut x = lincomb(tau1, &z, tau2, &snapshot);
                    axpy(1.0 - tau1 - tau2, &y, &mut x);
                    x
                };
                let i = rng.gen_range(0..m);
                let mut est = split.component_difference(i, &x, &snapshot, ledger);
                axpy(1.0, &snap_grad, &mut est);
                let mut zt = z.clone();
                axpy(-alpha, &est, &mut zt);
                z = z_prox.apply(&zt)?;
                let mut yt = x.clone();
                axpy(-1.0 / (3.0 * l_bar), &est, &mut yt);
                y = y_prox.apply(&yt)?;
                axpy(w, &y, &mut avg);
                wsum += w;
                w *= growth;
            }
            avg.iter_mut().for_each(|v| *v /= wsum);
            snapshot = avg;
            let (sg, full) = split.full_gradients(&snapshot, &combined, ledger);
            snap_grad = sg;
            residual = norm(&full);
            trace.record(epoch, ledger, data.objective(&snapshot), residual);
            debug!("katyusha epoch={epoch} grad={residual:.3e} accesses={}", ledger.data_accesses());
            let diverged = !residual.is_finite() || residual > 1e3 * g0.max(f64::MIN_POSITIVE);
            if diverged {
                if restarts >= cfg.max_restarts {
                    return Err(OptError::Divergence(format!(
                        "Katyusha diverged after {restarts} restarts (L = {l_bar:e})"
                    )));
                }
                restarts += 1;
                l_bar *= 2.0;
                warn!("katyusha diverged at epoch {epoch}; restarting with L = {l_bar:.3e}");
                continue 'restart;
            }
        }
        return Err(OptError::NoConvergence {
            solver: "Katyusha".into(),
            iterations: cfg.max_epochs,
            residual,
        });
    }
}

/// Nesterov's accelerated gradient on `F` with full gradients (`n` reads each).
/// Smoothness from 20 charged power steps on `A^T A / n`, inflated by 10%.
pub fn agd_baseline(data: &RegressionDataset, eps: f64, max_iters: usize, ledger: &OracleLedger) -> Result<ErmReport> {
    let mu = data.mu;
    if !(mu > 0.0) {
        return Err(OptError::InvalidParameter("baseline needs mu > 0".into()));
    }
    let d = data.d();
    let n = data.n();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
    let mut lam = 0.0;
    for _ in 0..20 {
        let s = norm(&v);
        v.iter_mut().for_each(|t| *t /= s);
        let mut w = vec![0.0; d];
        data.normal_apply_add(0..n, 1.0 / n as f64, &v, &mut w, ledger);
        lam = dot(&v, &w);
        v = w;
    }
    let l = 1.1 * lam + mu;
    let q = (mu / l).sqrt();
    let beta = (1.0 - q) / (1.0 + q);
    let target = 2.0 * mu * eps;
    let mut x = vec![0.0; d];
    let mut y = x.clone();
    let mut trace = Trace::new();
    for k in 0..max_iters {
        let g = data.full_gradient(&y, ledger);
        let gy = norm_sq(&g);
        if k % 10 == 0 {
            trace.record(k, ledger, data.objective(&y), gy.sqrt());
        }
        if gy <= target {
            return Ok(ErmReport {
                report: SolverReport {
                    objective: data.objective(&y),
                    x_hat: y,
                    ledger_snapshot: ledger.snapshot(),
                    iterations: k,
                    trace,
                    branch: Branch::Agd,
                    residual: gy.sqrt(),
                },
                epochs: k,
                l_bar: l,
                restarts: 0,
                total_rank: 0,
            });
        }
        let mut x_next = y.clone();
        axpy(-1.0 / l, &g, &mut x_next);
        y = lincomb(1.0 + beta, &x_next, -beta, &x);
        x = x_next;
    }
    Err(OptError::NoConvergence {
        solver: "full-gradient AGD".into(),
        iterations: max_iters,
        residual: f64::NAN,
    })
}
