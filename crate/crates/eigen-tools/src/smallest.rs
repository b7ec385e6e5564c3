//! Two-stage smallest-eigenvalue finder for symmetric operators with `||A|| <= 1`.
//!
//! Stage 1 runs an inexact shift-and-invert power method on `(delta_k - u) I + A`
//! and walks the shift down toward `-lambda_d`. It either certifies `lambda_d`
//! directly or, when `lambda_d` is clearly negative, hands a deflated operator
//! to stage 2, which finds the top eigenvalue of `M = 2 a_s I - A_s` by a
//! LazySVD-style search followed by simultaneous iteration or a fine
//! shift-and-invert solve.

use log::debug;
use oracle_core::linalg::{dot, normalize, orthonormalize, project_out, scaled};
use oracle_core::rng::{gaussian_vector, random_unit_vector, seeded_rng};
use oracle_core::{
    cg_solve, dense_eigendecomposition, CountingOracle, DenseMatrix, LinearOperator, LowRankDeflation, OptError,
    OracleLedger, Projected, QuadraticProblem, Result, Shifted,
};

use crate::leading::{estimate_norm, power_leading, shift_invert_leading};

/// Shift anchor `u`.
const ANCHOR: f64 = 0.0;
/// Initial shift `delta_0`; `B_0 = 2 I + A` is well conditioned when `||A|| <= 1`.
const INITIAL_SHIFT: f64 = 2.0;
const MAX_ROUNDS: usize = 400;

/// Bookkeeping of the stage-1 and stage-2 iterations.
#[derive(Debug, Clone, Default)]
pub struct EigFinderState {
    pub u: f64,
    pub delta_k: f64,
    /// Latest gap estimate `Delta_k`.
    pub big_delta: f64,
    /// Deflation count of the last round.
    pub s_k: usize,
    /// Stage-2 Rayleigh values `b_k`.
    pub b_list: Vec<f64>,
    /// All `Delta_k` values in order.
    pub delta_history: Vec<f64>,
    pub rounds: usize,
}

/// Data handed from stage 1 to stage 2.
#[derive(Debug, Clone)]
pub struct Handoff {
    /// Deflation of `B_k = (delta_k - u) I + A`.
    pub deflation: LowRankDeflation,
    pub a_s: f64,
    pub delta_k: f64,
    pub u: f64,
}

impl Handoff {
    /// `M = 2 a_s I - A_s` with `A_s = (delta_k - u) I + A - A_1`.
    pub fn operator<'a, O: LinearOperator + ?Sized>(&'a self, op: &'a O) -> HandoffOperator<'a, O> {
        HandoffOperator { op, handoff: self }
    }

    /// Maps `lambda_1(M)` back to `lambda_d(A)`.
    pub fn map_back(&self, lambda_max_m: f64) -> f64 {
        -lambda_max_m + 2.0 * self.a_s - self.delta_k + self.u
    }
}

pub struct HandoffOperator<'a, O: ?Sized> {
    op: &'a O,
    handoff: &'a Handoff,
}

impl<O: LinearOperator + ?Sized> LinearOperator for HandoffOperator<'_, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let h = self.handoff;
        self.op.apply_into(x, out);
        h.deflation.apply_add(-1.0, x, out);
        let diag = 2.0 * h.a_s - (h.delta_k - h.u);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = diag * xi - *o;
        }
    }
}

#[derive(Debug, Clone)]
pub enum Stage1Outcome {
    Estimate { lambda_hat: f64 },
    Handoff(Handoff),
}

/// Stage 1. `op` must already charge its products and satisfy `||op|| <= 1`.
pub fn smallest_eig_stage1<O: LinearOperator + ?Sized>(
    op: &O,
    eps: f64,
    seed: u64,
) -> Result<(Stage1Outcome, EigFinderState)> {
    if !(eps > 0.0) {
        return Err(OptError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let d = op.dim();
    let eps2 = (eps / (100.0 * (d * d) as f64)).min(0.1);
    let mut state = EigFinderState {
        u: ANCHOR,
        delta_k: INITIAL_SHIFT,
        ..Default::default()
    };
    let mut last_valid = INITIAL_SHIFT;
    while state.rounds < MAX_ROUNDS {
        state.rounds += 1;
        let shift = state.delta_k - state.u;
        let big_delta = match gap_estimate(op, shift, seed.wrapping_add(state.rounds as u64))? {
            Some(v) => v,
            None => {
                // The shift went below -lambda_d; retreat halfway to the last valid one.
                debug!("stage1 shift {shift:.6e} invalid, backing off");
                state.delta_k = 0.5 * (state.delta_k + last_valid);
                continue;
            }
        };
        last_valid = state.delta_k;
        state.big_delta = big_delta;
        state.delta_history.push(big_delta);
        debug!("stage1 round={} delta_k={:.6e} Delta_k={:.6e}", state.rounds, state.delta_k, big_delta);

        if big_delta <= eps / 3.0 {
            return Ok((
                Stage1Outcome::Estimate {
                    lambda_hat: state.u - state.delta_k,
                },
                state,
            ));
        }
        // The deflation loop only feeds the handoff rule, which needs both
        // shift > 0 and Delta_k <= shift / 3; skip it otherwise.
        if shift > 0.0 && big_delta <= shift / 3.0 {
            let b = Shifted::new(op, 1.0, shift);
            let mut deflation = LowRankDeflation::empty(d);
            let mut s = 1usize;
            let mut a_s = leading_rayleigh(&b, &mut deflation, eps2, seed, state.rounds, s)?;
            while a_s.0 > 1.5 * shift && (s as f64) <= 0.5 * (a_s.0 / big_delta).sqrt() && s < d {
                deflation.push(a_s.0, a_s.1.clone())?;
                s += 1;
                a_s = leading_rayleigh(&b, &mut deflation, eps2, seed, state.rounds, s)?;
            }
            state.s_k = s;
            if a_s.0 <= 2.0 * shift {
                return Ok((
                    Stage1Outcome::Handoff(Handoff {
                        deflation,
                        a_s: a_s.0,
                        delta_k: state.delta_k,
                        u: state.u,
                    }),
                    state,
                ));
            }
        }
        state.delta_k -= 0.5 * big_delta;
    }
    Err(OptError::NoConvergence {
        solver: "smallest eigenvalue stage 1".into(),
        iterations: state.rounds,
        residual: state.big_delta,
    })
}

fn leading_rayleigh<O: LinearOperator + ?Sized>(
    b: &Shifted<&O>,
    deflation: &mut LowRankDeflation,
    eps2: f64,
    seed: u64,
    round: usize,
    s: usize,
) -> Result<(f64, Vec<f64>)> {
    let cur = oracle_core::Deflated::new(b, &*deflation);
    let lead = power_leading(&cur, 1.0 / 3.0, eps2, seed ^ ((round as u64) << 20) ^ s as u64)?;
    Ok((lead.rayleigh, lead.vector))
}

/// Inexact inverse power method on `B = shift I + A`; returns `Delta = 1 / (2 w^T B^{-1} w)`,
/// or `None` when `B` turns out not to be positive definite.
fn gap_estimate<O: LinearOperator + ?Sized>(op: &O, shift: f64, seed: u64) -> Result<Option<f64>> {
    let d = op.dim();
    let b = Shifted::new(op, 1.0, shift);
    let mut rng = seeded_rng(seed);
    let mut w = random_unit_vector(&mut rng, d);
    let max_steps = 2 * (d.max(2) as f64).log2().ceil() as usize + 10;
    let mut prev = 0.0;
    let mut warm: Option<f64> = None;
    for t in 0..max_steps {
        let x0 = warm.map(|v| scaled(v, &w));
        let out = cg_solve(&b, &w, x0.as_deref(), 1e-11, 20 * d + 200);
        if out.negative_curvature {
            return Ok(None);
        }
        let wz = dot(&w, &out.x);
        if !(wz > 0.0) || !wz.is_finite() {
            return Ok(None);
        }
        if t >= 2 && (wz - prev).abs() <= 1e-3 * wz {
            return Ok(Some(0.5 / wz));
        }
        prev = wz;
        warm = Some(wz);
        w = out.x;
        normalize(&mut w);
    }
    Ok(Some(0.5 / prev))
}

/// Stage 2: top eigenvalue of the PSD operator `m` to accuracy `eps / 2`.
pub fn smallest_eig_stage2<O: LinearOperator + ?Sized>(
    m: &O,
    eps: f64,
    seed: u64,
    state: &mut EigFinderState,
) -> Result<f64> {
    let d = m.dim();
    let eps3 = (eps * eps / (100.0 * (d * d) as f64)).min(0.1);
    let delta = 1.0 / 900.0;
    let h_delta = shift_invert_leading(m, delta, eps3, 1e-12, seed)?.rayleigh;
    if h_delta <= 0.0 {
        return Ok(0.0);
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut k = 0usize;
    loop {
        k += 1;
        let mk = Projected {
            inner: m,
            basis: &basis,
        };
        let mut v = shift_invert_leading(&mk, delta, eps3, 1e-12, seed.wrapping_add(k as u64))?.vector;
        project_out(&basis, &mut v);
        if normalize(&mut v) == 0.0 {
            v = random_unit_vector(&mut seeded_rng(seed ^ k as u64), d);
            project_out(&basis, &mut v);
            normalize(&mut v);
        }
        let b_k = dot(&v, &m.apply(&v));
        state.b_list.push(b_k);
        basis.push(v);
        debug!("stage2 k={k} b_k={b_k:.6e} h={h_delta:.6e}");
        if (k as f64) >= (h_delta / eps).sqrt() || k >= d {
            let fine = (eps / (3.0 * h_delta)).min(0.5);
            let lead = shift_invert_leading(m, fine, eps3, 1e-12, seed.wrapping_add(7919))?;
            return Ok(lead.rayleigh);
        }
        if b_k <= 0.95 * h_delta {
            return Ok(simultaneous_iteration(m, k, eps, seed));
        }
    }
}

/// Largest Ritz value of `m` on the span of `m^l V_0`, `V_0` an `N(0, 1/d)` matrix with `k` columns
/// and `l = ceil(40 ln(d / eps))`. Columns are re-orthonormalized every step.
pub fn simultaneous_iteration<O: LinearOperator + ?Sized>(m: &O, k: usize, eps: f64, seed: u64) -> f64 {
    let d = m.dim();
    let mut rng = seeded_rng(seed ^ 0x5eed);
    let sd = 1.0 / (d as f64).sqrt();
    let mut v: Vec<Vec<f64>> = (0..k).map(|_| scaled(sd, &gaussian_vector(&mut rng, d))).collect();
    let l = (40.0 * (d as f64 / eps).ln()).ceil().max(1.0) as usize;
    for _ in 0..l {
        v = orthonormalize(&v.iter().map(|c| m.apply(c)).collect::<Vec<_>>());
        if v.is_empty() {
            return 0.0;
        }
    }
    let mv: Vec<Vec<f64>> = v.iter().map(|c| m.apply(c)).collect();
    let r = v.len();
    let mut small = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            small[(i, j)] = 0.5 * (dot(&v[i], &mv[j]) + dot(&v[j], &mv[i]));
        }
    }
    dense_eigendecomposition(&small).map(|e| e.max()).unwrap_or(0.0)
}

/// Result of [`find_smallest_eigenvalue`].
#[derive(Debug, Clone)]
pub struct SmallestEigen {
    pub lambda_hat: f64,
    /// 1 when stage 1 certified the value, 2 when stage 2 was needed.
    pub stage: u8,
    pub state: EigFinderState,
}

/// `lambda_d` of an operator with `||op|| <= 1` to additive accuracy `eps`.
pub fn find_smallest_eigenvalue<O: LinearOperator + ?Sized>(op: &O, eps: f64, seed: u64) -> Result<SmallestEigen> {
    let (outcome, mut state) = smallest_eig_stage1(op, eps, seed)?;
    match outcome {
        Stage1Outcome::Estimate { lambda_hat } => Ok(SmallestEigen {
            lambda_hat,
            stage: 1,
            state,
        }),
        Stage1Outcome::Handoff(h) => {
            let m = h.operator(op);
            let top = smallest_eig_stage2(&m, eps, seed.wrapping_add(104729), &mut state)?;
            Ok(SmallestEigen {
                lambda_hat: h.map_back(top),
                stage: 2,
                state,
            })
        }
    }
}

/// Rescales by a power-method norm estimate so the finder's `||A|| <= 1` precondition holds,
/// then maps the answer back. The scale is twice the estimate; the stage-1 shift tolerates
/// `||A / scale|| < 2`.
pub fn find_smallest_eigenvalue_scaled<O: LinearOperator + ?Sized>(op: &O, eps: f64, seed: u64) -> Result<SmallestEigen> {
    let scale = 2.0 * estimate_norm(op, 10, seed ^ 0xabc);
    if scale == 0.0 {
        return Ok(SmallestEigen {
            lambda_hat: 0.0,
            stage: 1,
            state: EigFinderState::default(),
        });
    }
    let scaled_op = Shifted::new(op, 1.0 / scale, 0.0);
    let mut out = find_smallest_eigenvalue(&scaled_op, eps / scale, seed)?;
    out.lambda_hat *= scale;
    Ok(out)
}

/// Smallest eigenvalue of the Hessian at `x`, charging HVP calls.
pub fn find_smallest_eigenvalue_at(oracle: &CountingOracle<'_>, x: &[f64], eps: f64, seed: u64) -> Result<SmallestEigen> {
    let h = oracle.hessian_at(x);
    find_smallest_eigenvalue_scaled(&h, eps, seed)
}

/// Smallest eigenvalue of `A` in a quadratic problem, charging gradient calls.
pub fn find_smallest_eigenvalue_quadratic(
    problem: &QuadraticProblem,
    eps: f64,
    ledger: &OracleLedger,
    seed: u64,
) -> Result<SmallestEigen> {
    find_smallest_eigenvalue_scaled(&problem.counted(ledger), eps, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracle_core::DenseMatrix;

    #[test]
    fn identity_is_estimated_in_stage_one() {
        let a = DenseMatrix::identity(6);
        let (out, _) = smallest_eig_stage1(&a, 1e-3, 1).unwrap();
        match out {
            Stage1Outcome::Estimate { lambda_hat } => assert!((lambda_hat - 1.0).abs() <= 1e-3),
            Stage1Outcome::Handoff(_) => panic!("identity must not hand off"),
        }
    }

    #[test]
    fn two_by_two_negative() {
        let a = DenseMatrix::from_diag(&[1.0, -0.5]);
        let (out, _) = smallest_eig_stage1(&a, 1e-3, 2).unwrap();
        match out {
            Stage1Outcome::Estimate { lambda_hat } => assert!((lambda_hat + 0.5).abs() <= 1e-3),
            Stage1Outcome::Handoff(h) => assert!(h.a_s <= 3.0),
        }
        let full = find_smallest_eigenvalue(&a, 1e-3, 2).unwrap();
        assert!((full.lambda_hat + 0.5).abs() <= 1e-3);
    }

    #[test]
    fn quadratic_with_negative_direction() {
        let a = DenseMatrix::from_diag(&[1.0, -0.3]);
        let out = find_smallest_eigenvalue(&a, 1e-3, 5).unwrap();
        assert!((out.lambda_hat + 0.3).abs() <= 1e-3, "{}", out.lambda_hat);
    }
}
