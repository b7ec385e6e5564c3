//! Block lower-bound matrices built around a conditioned Wishart draw.
//!
//! `M = diag(I_s - (c/5) W_s, m I_{d-s-1}, 0)` with `m = 1 - (tau^alpha / d)^{1/alpha}`
//! and `W_s = G G^T / s`, resampled until its bottom edge and norm fall in
//! a fixed event.

use oracle_core::rng::{gaussian_vector, seeded_rng};
use oracle_core::{dense_eigendecomposition, DenseMatrix, OptError, Result};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution};

use crate::keyvalue::KeyValues;
use crate::spectrum::DENSE_LIMIT;

/// Thresholds of the Wishart event in units of `s^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WishartConstants {
    /// `lambda_s(W) <= c1 / s^2`.
    pub c1: f64,
    /// `c2 / s^2 <= lambda_{s-1}(W) - lambda_s(W) <= c3 / s^2`.
    pub c2: f64,
    pub c3: f64,
    /// `||W|| <= norm_cap`.
    pub norm_cap: f64,
}

impl WishartConstants {
    /// Geometric middle of the gap window.
    pub fn gap_mid(&self) -> f64 {
        (self.c2 * self.c3).sqrt()
    }
}

/// Frozen calibration from `examples/calibrate_wishart.rs` (10^4 draws at
/// s = 50, 100, 200): 90th percentile of the bottom edge, 10th/90th of the gap.
pub const WISHART_EVENT: WishartConstants = WishartConstants {
    c1: 1.90,
    c2: 0.95,
    c3: 8.43,
    norm_cap: 5.0,
};

/// Cap on rejection-sampling draws.
pub const MAX_WISHART_DRAWS: usize = 2000;

/// Certificate thresholds, all relative to `mu` or `tau_alpha^alpha`.
pub const TOP_FACTOR: f64 = 8.0;
pub const GAP_WINDOW: (f64, f64) = (0.125, 8.0);
pub const TRACE_FACTOR: f64 = 4.0;
/// Shift `c_0` in `(1 + c_0 gap) I - M`.
pub const TRACE_SHIFT: f64 = 1.0;

/// `W = G G^T / s` with `G` an `s x s` standard normal matrix.
pub fn sample_wishart<R: Rng + ?Sized>(s: usize, rng: &mut R) -> DenseMatrix {
    let g: Vec<Vec<f64>> = (0..s).map(|_| gaussian_vector(rng, s)).collect();
    let mut w = DenseMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..=i {
            let v = g[i].iter().zip(&g[j]).map(|(a, b)| a * b).sum::<f64>() / s as f64;
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

/// Bottom two eigenvalues and the top one, from descending eigenvalues.
fn edge_stats(desc: &[f64]) -> (f64, f64, f64) {
    let s = desc.len();
    (desc[s - 1], desc[s - 2] - desc[s - 1], desc[0])
}

pub fn in_wishart_event(desc: &[f64], k: &WishartConstants) -> bool {
    let s = desc.len();
    let s2 = (s * s) as f64;
    let (low, gap, top) = edge_stats(desc);
    low * s2 <= k.c1 && gap * s2 >= k.c2 && gap * s2 <= k.c3 && top <= k.norm_cap
}

/// Eigenvalues of a symmetric tridiagonal matrix below `x` (Sturm count).
fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let prev = if i == 0 { 0.0 } else { off_sq[i - 1] / q };
        q = diag[i] - x - prev;
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by bisection.
fn tridiagonal_eigenvalue(diag: &[f64], off_sq: &[f64], k: usize, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off_sq, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Edge statistics of one draw from the bidiagonal model of `G G^T / s`:
/// `G G^T` has the law of `B B^T` with `B` lower bidiagonal, diagonal
/// `chi_s, ..., chi_1` and subdiagonal `chi_{s-1}, ..., chi_1`.
fn bidiagonal_edge<R: Rng + ?Sized>(s: usize, rng: &mut R) -> (f64, f64, f64) {
    let chi = |k: usize, rng: &mut R| ChiSquared::new(k as f64).expect("positive dof").sample(rng).sqrt();
    let d: Vec<f64> = (0..s).map(|i| chi(s - i, rng)).collect();
    let e: Vec<f64> = (0..s - 1).map(|i| chi(s - 1 - i, rng)).collect();
    let inv = 1.0 / s as f64;
    let diag: Vec<f64> = (0..s)
        .map(|i| (d[i] * d[i] + if i > 0 { e[i - 1] * e[i - 1] } else { 0.0 }) * inv)
        .collect();
    let off_sq: Vec<f64> = (0..s - 1).map(|i| (d[i] * e[i] * inv).powi(2)).collect();
    let bound = (0..s)
        .map(|i| {
            let left = if i > 0 { off_sq[i - 1].sqrt() } else { 0.0 };
            let right = if i + 1 < s { off_sq[i].sqrt() } else { 0.0 };
            diag[i] + left + right
        })
        .fold(0.0_f64, f64::max);
    let l0 = tridiagonal_eigenvalue(&diag, &off_sq, 0, bound);
    let l1 = tridiagonal_eigenvalue(&diag, &off_sq, 1, bound);
    let top = tridiagonal_eigenvalue(&diag, &off_sq, s - 1, bound);
    (l0, l1 - l0, top)
}

/// Empirical edge percentiles at one block size.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartCalibration {
    pub s: usize,
    pub draws: usize,
    /// 90th percentile of `s^2 lambda_s`.
    pub low_p90: f64,
    /// 10th and 90th percentiles of `s^2 (lambda_{s-1} - lambda_s)`.
    pub gap_p10: f64,
    pub gap_p90: f64,
    /// Fraction of draws with `||W|| <= 5`.
    pub norm_ok: f64,
}

/// Monte-Carlo edge statistics of `G G^T / s` through the bidiagonal model.
pub fn calibrate_wishart_event(s: usize, draws: usize, seed: u64) -> Result<WishartCalibration> {
    if s < 2 || draws < 10 {
        return Err(OptError::InvalidParameter(format!("calibration needs s >= 2 and >= 10 draws, got s={s} draws={draws}")));
    }
    let mut rng = seeded_rng(seed);
    let s2 = (s * s) as f64;
    let mut lows = Vec::with_capacity(draws);
    let mut gaps = Vec::with_capacity(draws);
    let mut norm_ok = 0usize;
    for _ in 0..draws {
        let (low, gap, top) = bidiagonal_edge(s, &mut rng);
        lows.push(low * s2);
        gaps.push(gap * s2);
        norm_ok += usize::from(top <= 5.0);
    }
    Ok(WishartCalibration {
        s,
        draws,
        low_p90: percentile(&mut lows, 0.9),
        gap_p10: percentile(&mut gaps, 0.1),
        gap_p90: percentile(&mut gaps, 0.9),
        norm_ok: norm_ok as f64 / draws as f64,
    })
}

fn percentile(v: &mut [f64], p: f64) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let idx = ((v.len() - 1) as f64 * p).round() as usize;
    v[idx]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardRegime {
    /// `mu^{-1/2} <= tau^alpha`: block size `mu^{-1/2}`.
    Case1,
    /// `mu^{-1/2} >= tau^alpha` and the middle-regime size fits in `d`.
    Case2,
    /// The middle-regime size exceeds `d`: block size `d/2`.
    Case3,
}

impl std::str::FromStr for HardRegime {
    type Err = OptError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case1" | "1" => Ok(Self::Case1),
            "case2" | "2" => Ok(Self::Case2),
            "case3" | "3" => Ok(Self::Case3),
            other => Err(OptError::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

impl std::fmt::Display for HardRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Case1 => "case1",
            Self::Case2 => "case2",
            Self::Case3 => "case3",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardInstanceSpec {
    pub d: usize,
    pub mu: f64,
    pub alpha: f64,
    pub tau_alpha: f64,
    pub regime: HardRegime,
    /// Block size; `None` derives it from the regime.
    pub s: Option<usize>,
    /// Mixing constant; `None` uses 1/2 in case 1 and sizes it to put the gap at `mu` otherwise.
    pub c: Option<f64>,
    pub seed: u64,
}

impl HardInstanceSpec {
    pub fn new(d: usize, mu: f64, alpha: f64, tau_alpha: f64, regime: HardRegime, seed: u64) -> Self {
        Self {
            d,
            mu,
            alpha,
            tau_alpha,
            regime,
            s: None,
            c: None,
            seed,
        }
    }

    /// `tau^{alpha/(1+2alpha)} mu^{-alpha/(1+2alpha)}`.
    pub fn middle_scale(&self) -> f64 {
        let e = self.alpha / (1.0 + 2.0 * self.alpha);
        self.tau_alpha.powf(e) * self.mu.powf(-e)
    }

    pub fn budget(&self) -> f64 {
        self.tau_alpha.powf(self.alpha)
    }

    /// Diagonal value of the middle block.
    pub fn middle_value(&self) -> f64 {
        1.0 - (self.budget() / self.d as f64).powf(1.0 / self.alpha)
    }

    pub fn block_size(&self) -> usize {
        if let Some(s) = self.s {
            return s;
        }
        let k = WISHART_EVENT;
        let s = match self.regime {
            HardRegime::Case1 => {
                let c = self.c.unwrap_or(0.5);
                (c * k.gap_mid() / (5.0 * self.mu)).sqrt().round() as usize
            }
            HardRegime::Case2 => self.middle_scale().round() as usize,
            HardRegime::Case3 => self.d / 2,
        };
        s.clamp(2, self.d.saturating_sub(1).max(2))
    }

    pub fn mixing(&self) -> f64 {
        if let Some(c) = self.c {
            return c;
        }
        match self.regime {
            HardRegime::Case1 => 0.5,
            HardRegime::Case2 | HardRegime::Case3 => {
                let s = self.block_size() as f64;
                5.0 * self.mu * s * s / WISHART_EVENT.gap_mid()
            }
        }
    }

    /// Checks the regime's defining inequalities; the error names the violated one.
    pub fn validate(&self) -> Result<()> {
        let fail = |clause: &str, detail: String| {
            Err(OptError::InvalidParameter(format!("{} violates `{clause}`: {detail}", self.regime)))
        };
        if self.d < 3 || self.d > DENSE_LIMIT {
            return Err(OptError::InvalidParameter(format!("d = {} outside [3, {DENSE_LIMIT}]", self.d)));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(OptError::InvalidParameter(format!("mu = {} outside (0, 1)", self.mu)));
        }
        if !(self.alpha > 0.0 && self.tau_alpha > 0.0) {
            return Err(OptError::InvalidParameter(format!("alpha = {}, tau_alpha = {}", self.alpha, self.tau_alpha)));
        }
        let inv_sqrt_mu = self.mu.powf(-0.5);
        let budget = self.budget();
        let dmu = self.d as f64 * self.mu.powf(self.alpha);
        if budget < dmu {
            return fail("tau_alpha^alpha >= d mu^alpha", format!("{budget:e} < {dmu:e}"));
        }
        let mid = self.middle_scale();
        let d = self.d as f64;
        match self.regime {
            HardRegime::Case1 => {
                if inv_sqrt_mu > budget {
                    return fail("mu^(-1/2) <= tau_alpha^alpha", format!("{inv_sqrt_mu:e} > {budget:e}"));
                }
            }
            HardRegime::Case2 => {
                if inv_sqrt_mu < budget {
                    return fail("mu^(-1/2) >= tau_alpha^alpha", format!("{inv_sqrt_mu:e} < {budget:e}"));
                }
                if mid > d {
                    return fail("tau_alpha^(a/(1+2a)) mu^(-a/(1+2a)) <= d", format!("{mid:e} > {d}"));
                }
            }
            HardRegime::Case3 => {
                if mid < d {
                    return fail("tau_alpha^(a/(1+2a)) mu^(-a/(1+2a)) >= d", format!("{mid:e} < {d}"));
                }
            }
        }
        let s = self.block_size();
        if s < 2 || s + 1 > self.d {
            return fail("2 <= s <= d - 1", format!("s = {s}"));
        }
        let c = self.mixing();
        if !(c > 0.0 && c <= 1.0) {
            return fail("mixing constant c in (0, 1]", format!("c = {c:e}"));
        }
        Ok(())
    }
}

/// `diag(I_s - (c/5) W, m I_{d-s-1}, 0)`.
pub fn assemble_hard_matrix(w: &DenseMatrix, d: usize, c: f64, middle: f64) -> Result<DenseMatrix> {
    let s = w.rows();
    if !w.is_square() || s + 1 > d {
        return Err(OptError::DimensionMismatch { expected: d - 1, got: s });
    }
    let mut m = DenseMatrix::zeros(d, d);
    for i in 0..s {
        for j in 0..s {
            m[(i, j)] = if i == j { 1.0 } else { 0.0 } - 0.2 * c * w[(i, j)];
        }
    }
    for i in s..d - 1 {
        m[(i, i)] = middle;
    }
    Ok(m)
}

/// Dense-verified facts about a hard instance.
#[derive(Debug, Clone, PartialEq)]
pub struct HardCertificate {
    pub regime: HardRegime,
    pub d: usize,
    pub s: usize,
    pub c: f64,
    pub mu: f64,
    pub alpha: f64,
    pub tau_alpha: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub lambda_min: f64,
    pub gap: f64,
    pub middle_value: f64,
    /// `tr(((1 + c_0 gap) I - M)^alpha)`.
    pub shifted_trace: f64,
    pub trace_budget: f64,
    /// `0 <= M <= I` with the zero block at `lambda_min = 0`.
    pub spectral_ok: bool,
    /// `1 - lambda_1 <= 8 mu`, `gap / mu` in the window, top pair from the first block.
    pub gap_ok: bool,
    pub trace_ok: bool,
    pub draws: usize,
}

impl HardCertificate {
    pub fn pass(&self) -> bool {
        self.spectral_ok && self.gap_ok && self.trace_ok
    }

    /// Names of the clauses that fail.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.spectral_ok {
            out.push("spectral");
        }
        if !self.gap_ok {
            out.push("gap");
        }
        if !self.trace_ok {
            out.push("trace");
        }
        out
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("kind", "wishart");
        kv.set("regime", self.regime);
        kv.set("d", self.d);
        kv.set("s", self.s);
        kv.set_f64("c", self.c);
        kv.set_f64("mu", self.mu);
        kv.set_f64("alpha", self.alpha);
        kv.set_f64("tau_alpha", self.tau_alpha);
        kv.set_f64("lambda_1", self.lambda_1);
        kv.set_f64("lambda_2", self.lambda_2);
        kv.set_f64("lambda_min", self.lambda_min);
        kv.set_f64("gap", self.gap);
        kv.set_f64("middle_value", self.middle_value);
        kv.set_f64("shifted_trace", self.shifted_trace);
        kv.set_f64("trace_budget", self.trace_budget);
        kv.set("spectral_ok", self.spectral_ok);
        kv.set("gap_ok", self.gap_ok);
        kv.set("trace_ok", self.trace_ok);
        kv.set("draws", self.draws);
        kv.set("pass", self.pass());
        kv
    }
}

/// Certifies `m` against `spec` from a dense eigendecomposition of `m`.
pub fn certify_hard_instance(m: &DenseMatrix, spec: &HardInstanceSpec, draws: usize) -> Result<HardCertificate> {
    let eig = dense_eigendecomposition(m)?;
    let mut v = eig.values.clone();
    v.sort_by(|a, b| b.total_cmp(a));
    let (l1, l2, lmin) = (v[0], v[1], v[v.len() - 1]);
    let gap = l1 - l2;
    let mu = spec.mu;
    let s = spec.block_size();
    let middle = spec.middle_value();
    let tol = 1e-12;
    let shifted_trace: f64 = v.iter().map(|l| (1.0 + TRACE_SHIFT * gap - l).max(0.0).powf(spec.alpha)).sum();
    let trace_budget = TRACE_FACTOR * spec.budget();
    let middle_below = s + 1 == spec.d || middle < l2;
    Ok(HardCertificate {
        regime: spec.regime,
        d: spec.d,
        s,
        c: spec.mixing(),
        mu,
        alpha: spec.alpha,
        tau_alpha: spec.tau_alpha,
        lambda_1: l1,
        lambda_2: l2,
        lambda_min: lmin,
        gap,
        middle_value: middle,
        shifted_trace,
        trace_budget,
        spectral_ok: lmin >= -tol && lmin.abs() <= tol && l1 <= 1.0 + tol,
        gap_ok: 1.0 - l1 <= TOP_FACTOR * mu && gap >= GAP_WINDOW.0 * mu && gap <= GAP_WINDOW.1 * mu && middle_below,
        trace_ok: shifted_trace <= trace_budget,
        draws,
    })
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub matrix: DenseMatrix,
    pub wishart: DenseMatrix,
    pub certificate: HardCertificate,
}

pub fn gen_wishart_hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let s = spec.block_size();
    let mut rng = seeded_rng(spec.seed);
    let s2 = (s * s) as f64;
    let (mut worst_low, mut gap_range, mut top_max) = (0.0_f64, (f64::INFINITY, 0.0_f64), 0.0_f64);
    for draw in 1..=MAX_WISHART_DRAWS {
        let w = sample_wishart(s, &mut rng);
        let mut desc = dense_eigendecomposition(&w)?.values;
        desc.sort_by(|a, b| b.total_cmp(a));
        if in_wishart_event(&desc, &WISHART_EVENT) {
            let m = assemble_hard_matrix(&w, spec.d, spec.mixing(), spec.middle_value())?;
            let certificate = certify_hard_instance(&m, spec, draw)?;
            return Ok(HardInstance {
                matrix: m,
                wishart: w,
                certificate,
            });
        }
        let (low, gap, top) = edge_stats(&desc);
        worst_low = worst_low.max(low * s2);
        gap_range = (gap_range.0.min(gap * s2), gap_range.1.max(gap * s2));
        top_max = top_max.max(top);
    }
    Err(OptError::NoConvergence {
        solver: format!(
            "wishart rejection sampler at s={s} (max s^2 lambda_s {worst_low:.3}, s^2 gap range [{:.3}, {:.3}], max norm {top_max:.3})",
            gap_range.0, gap_range.1
        ),
        iterations: MAX_WISHART_DRAWS,
        residual: 0.0,
    })
}
