//! Leading-eigenvector routines for PSD operators.

use oracle_core::linalg::{dot, norm, normalize, scaled};
use oracle_core::rng::{random_unit_vector, seeded_rng};
use oracle_core::{cg_solve, LinearOperator, OptError, Result, Shifted};

/// Probability budget used to size the iteration counts: the random start has
/// squared overlap at least `p^2 / d` with the top eigenvector except with
/// probability about `p`.
pub const START_CONFIDENCE: f64 = 0.01;

/// Approximate top eigenpair.
#[derive(Debug, Clone)]
pub struct LeadingEigen {
    pub vector: Vec<f64>,
    /// `w^T A w` for the returned unit vector.
    pub rayleigh: f64,
    /// Final shift `gamma` when shift-and-invert was used.
    pub shift: Option<f64>,
}

/// How the extractor finds each leading vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeadingSolver {
    /// Power iteration on the operator itself.
    Power,
    /// Power iteration on `(gamma I - A)^{-1}` with CG inner solves.
    ShiftInvert,
    /// Power iteration that stops once the leakage is certified, see [`certified_power_leading`].
    CertifiedPower,
}

/// Mass below `(1 - delta)` times the top eigenvalue that the Rayleigh guarantee of
/// [`certified_power_leading`] is sized for.
pub const RAYLEIGH_SLACK: f64 = 0.25;

/// Number of power steps after which the squared mass outside the top
/// cluster is at most `eps`, when every discarded eigenvalue is at most
/// `ratio` times the leading one.
pub fn power_steps(d: usize, ratio: f64, eps: f64) -> usize {
    let p = START_CONFIDENCE;
    let num = (d.max(2) as f64 / (eps * p * p)).ln();
    (num / (2.0 * (1.0 / ratio).ln())).ceil().max(1.0) as usize
}

/// Plain power iteration with the step count fixed by [`power_steps`] for ratio `1 - delta`.
///
/// Meets the same contract as [`shift_invert_leading`]: `w^T A w >= (1-delta)(1-eps) lambda_1`
/// and the squared mass of `w` on eigenvalues below `(1-delta) lambda_1` is at most `eps`.
pub fn power_leading<O: LinearOperator + ?Sized>(op: &O, delta: f64, eps: f64, seed: u64) -> Result<LeadingEigen> {
    check_args(delta, eps)?;
    let d = op.dim();
    let mut rng = seeded_rng(seed);
    let mut w = random_unit_vector(&mut rng, d);
    let steps = power_steps(d, 1.0 - delta, eps);
    let mut z = vec![0.0; d];
    for _ in 0..steps {
        op.apply_into(&w, &mut z);
        let nz = norm(&z);
        if !nz.is_finite() {
            return Err(OptError::NonFinite("power iteration".into()));
        }
        if nz == 0.0 {
            // The operator annihilates w; any vector is a valid answer with Rayleigh 0.
            return Ok(LeadingEigen {
                vector: w,
                rayleigh: 0.0,
                shift: None,
            });
        }
        w = scaled(1.0 / nz, &z);
    }
    op.apply_into(&w, &mut z);
    Ok(LeadingEigen {
        rayleigh: dot(&w, &z),
        vector: w,
        shift: None,
    })
}

/// Power iteration with an a-posteriori leakage certificate.
///
/// After `t` steps `w_t = A^t w_0 / ||A^t w_0||` and `||A^t w_0||` is the product of the
/// step norms `n_s`, so the squared mass of `w_t` on eigenvalues at most `theta` is at
/// most `theta^{2t} / prod n_s^2`. Iteration stops once this bound is below `eps` for
/// `theta = (1 - delta) w_t^T A w_t`, but not before the step count that puts the
/// Rayleigh value within `(1 - delta)(1 - RAYLEIGH_SLACK)` of `lambda_1`; it never
/// runs longer than [`power_leading`].
pub fn certified_power_leading<O: LinearOperator + ?Sized>(op: &O, delta: f64, eps: f64, seed: u64) -> Result<LeadingEigen> {
    check_args(delta, eps)?;
    let d = op.dim();
    let mut rng = seeded_rng(seed);
    let mut w = random_unit_vector(&mut rng, d);
    let t_max = power_steps(d, 1.0 - delta, eps);
    let t_min = power_steps(d, 1.0 - delta, RAYLEIGH_SLACK).min(t_max);
    let log_eps = eps.ln();
    let mut log_growth = 0.0;
    let mut z = vec![0.0; d];
    for t in 0..=t_max {
        op.apply_into(&w, &mut z);
        let a = dot(&w, &z);
        let nz = norm(&z);
        if !nz.is_finite() {
            return Err(OptError::NonFinite("power iteration".into()));
        }
        let theta = (1.0 - delta) * a;
        let certified = theta <= 0.0 || 2.0 * (t as f64 * theta.ln() - log_growth) <= log_eps;
        if t == t_max || nz == 0.0 || (t >= t_min && certified) {
            return Ok(LeadingEigen {
                vector: w,
                rayleigh: a,
                shift: None,
            });
        }
        log_growth += nz.ln();
        w = scaled(1.0 / nz, &z);
    }
    unreachable!("loop returns at t_max")
}

/// Shift-and-invert power method.
///
/// The shift starts at `1.1` times the largest `||A w||` seen in 5 warm power
/// steps and is pulled toward `lambda_1` until `gamma - lambda_1 <= delta lambda_1 / 2`;
/// each pull uses the inverse Rayleigh value `w^T (gamma I - A)^{-1} w`, whose
/// reciprocal bounds `gamma - lambda_1` from above. A shift that turns out to be
/// below `lambda_1` is detected through CG negative curvature and backed off.
/// The final phase runs enough inverse power steps for ratio `1/3`.
pub fn shift_invert_leading<O: LinearOperator + ?Sized>(
    op: &O,
    delta: f64,
    eps: f64,
    inner_tol: f64,
    seed: u64,
) -> Result<LeadingEigen> {
    check_args(delta, eps)?;
    let d = op.dim();
    let mut rng = seeded_rng(seed);
    let mut w = random_unit_vector(&mut rng, d);
    let mut upper = 0.0_f64;
    let mut lam_lo = 0.0_f64;
    for _ in 0..5 {
        let z = op.apply(&w);
        let nz = norm(&z);
        if !nz.is_finite() {
            return Err(OptError::NonFinite("shift-and-invert warm start".into()));
        }
        lam_lo = lam_lo.max(dot(&w, &z));
        upper = upper.max(nz);
        if nz == 0.0 {
            return Ok(LeadingEigen {
                vector: w,
                rayleigh: 0.0,
                shift: None,
            });
        }
        w = scaled(1.0 / nz, &z);
    }

    let mut si = ShiftState {
        gamma: 1.1 * upper,
        gamma_valid: None,
        inner_tol,
        warm: None,
    };
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > 200 {
            return Err(OptError::NoConvergence {
                solver: "shift-and-invert shift schedule".into(),
                iterations: rounds,
                residual: si.gamma - lam_lo,
            });
        }
        let mut ok = true;
        let mut wz = 0.0;
        for _ in 0..3 {
            match si.inverse_step(op, &w, lam_lo)? {
                Some((z, v)) => {
                    wz = v;
                    w = z;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            si.back_off(lam_lo);
            continue;
        }
        si.gamma_valid = Some(si.gamma);
        let gap_upper = 1.0 / wz;
        lam_lo = lam_lo.max(si.gamma - gap_upper);
        if gap_upper <= 0.5 * delta * lam_lo {
            break;
        }
        si.gamma -= 0.25 * gap_upper;
        si.warm = None;
    }

    let steps = power_steps(d, 1.0 / 3.0, eps);
    let mut done = 0;
    while done < steps {
        match si.inverse_step(op, &w, lam_lo)? {
            Some((z, _)) => {
                w = z;
                done += 1;
            }
            None => {
                // Only reachable through round-off; restart the final phase at a safer shift.
                si.back_off(lam_lo);
                done = 0;
            }
        }
    }
    let aw = op.apply(&w);
    Ok(LeadingEigen {
        rayleigh: dot(&w, &aw),
        vector: w,
        shift: Some(si.gamma),
    })
}

struct ShiftState {
    gamma: f64,
    gamma_valid: Option<f64>,
    inner_tol: f64,
    /// Last inverse Rayleigh value, used to warm start CG.
    warm: Option<f64>,
}

impl ShiftState {
    /// One step `w <- (gamma I - A)^{-1} w / ||.||`. Returns `None` when the shift is below `lambda_1`.
    fn inverse_step<O: LinearOperator + ?Sized>(
        &mut self,
        op: &O,
        w: &[f64],
        lam_lo: f64,
    ) -> Result<Option<(Vec<f64>, f64)>> {
        let shifted = Shifted::new(op, -1.0, self.gamma);
        let gap_lo = (self.gamma - lam_lo).max(1e-300);
        let kappa = (self.gamma.abs() / gap_lo).max(1.0);
        let cap = (20.0 * kappa.sqrt()) as usize + 100 + op.dim();
        let x0 = self.warm.map(|v| scaled(v, w));
        let out = cg_solve(&shifted, w, x0.as_deref(), self.inner_tol, cap);
        if out.negative_curvature {
            return Ok(None);
        }
        if !out.converged && out.residual_norm > 1e-6 {
            return Err(OptError::NoConvergence {
                solver: "shift-and-invert inner CG".into(),
                iterations: out.iterations,
                residual: out.residual_norm,
            });
        }
        let wz = dot(w, &out.x);
        if !(wz > 0.0) || !wz.is_finite() {
            return Ok(None);
        }
        let mut z = out.x;
        normalize(&mut z);
        self.warm = Some(wz);
        Ok(Some((z, wz)))
    }

    fn back_off(&mut self, lam_lo: f64) {
        self.warm = None;
        self.gamma = match self.gamma_valid {
            Some(v) if v > self.gamma => 0.5 * (self.gamma + v),
            _ => lam_lo.max(0.0) + 2.0 * (self.gamma - lam_lo).abs().max(1e-12 * lam_lo.abs().max(1.0)),
        };
    }
}

/// Dispatches to [`power_leading`] or [`shift_invert_leading`].
pub fn leading_eigenvector<O: LinearOperator + ?Sized>(
    op: &O,
    delta: f64,
    eps: f64,
    solver: LeadingSolver,
    seed: u64,
) -> Result<LeadingEigen> {
    match solver {
        LeadingSolver::Power => power_leading(op, delta, eps, seed),
        LeadingSolver::ShiftInvert => shift_invert_leading(op, delta, eps, 1e-10, seed),
        LeadingSolver::CertifiedPower => certified_power_leading(op, delta, eps, seed),
    }
}

/// Largest `||A w||` over `steps` power steps: a lower bound on `||A||` that is
/// accurate to a constant for a handful of steps. Works for indefinite operators.
pub fn estimate_norm<O: LinearOperator + ?Sized>(op: &O, steps: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut w = random_unit_vector(&mut rng, op.dim());
    let mut best = 0.0_f64;
    for _ in 0..steps.max(1) {
        let mut z = op.apply(&w);
        let nz = normalize(&mut z);
        best = best.max(nz);
        if nz == 0.0 {
            break;
        }
        w = z;
    }
    best
}

/// Constant-factor estimate of the smallest eigenvalue of a PSD operator.
#[derive(Debug, Clone, Copy)]
pub struct MuEstimate {
    pub mu_hat: f64,
    /// False when the budget ran out before the estimate stabilized.
    pub verified: bool,
}

/// Inverse power iteration with CG solves.
///
/// The inverse Rayleigh value never exceeds `1/lambda_d`, so `mu_hat >= lambda_d`;
/// iteration stops once it changes by less than 2% between steps, which in
/// practice puts `mu_hat` well within a factor 2 of `lambda_d`. `budget` caps
/// the number of inverse steps.
pub fn estimate_smallest_eigenvalue<O: LinearOperator + ?Sized>(op: &O, budget: usize, seed: u64) -> Result<MuEstimate> {
    let d = op.dim();
    let mut rng = seeded_rng(seed);
    let mut w = random_unit_vector(&mut rng, d);
    let mut prev = 0.0_f64;
    let mut inv_rq = 0.0_f64;
    let mut warm: Option<f64> = None;
    for step in 0..budget.max(2) {
        let x0 = warm.map(|v| scaled(v, &w));
        let out = cg_solve(op, &w, x0.as_deref(), 1e-8, 50 * d + 1000);
        if out.negative_curvature {
            return Err(OptError::NegativeCurvature("operator is not positive definite".into()));
        }
        inv_rq = dot(&w, &out.x);
        if !(inv_rq > 0.0) || !inv_rq.is_finite() {
            return Err(OptError::NonFinite("inverse Rayleigh quotient".into()));
        }
        w = out.x;
        normalize(&mut w);
        warm = Some(inv_rq);
        if step >= 2 && (inv_rq - prev).abs() <= 0.02 * inv_rq {
            return Ok(MuEstimate {
                mu_hat: 1.0 / inv_rq,
                verified: true,
            });
        }
        prev = inv_rq;
    }
    Ok(MuEstimate {
        mu_hat: 1.0 / inv_rq,
        verified: false,
    })
}

fn check_args(delta: f64, eps: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(OptError::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OptError::InvalidParameter(format!("eps must lie in (0,1), got {eps}")));
    }
    Ok(())
}
