//! Mini-batch partition and per-batch deflation.

use std::ops::Range;

use eigen_tools::{eigen_extract_op, ExtractMode, ExtractorConfig};
use log::{debug, warn};
use oracle_core::{LinearOperator, LowRankDeflation, OracleLedger, Result};
use rayon::prelude::*;

use crate::dataset::RegressionDataset;

/// Contiguous near-equal ranges covering `0..n`; the first `n mod m` get one extra row.
pub fn partition_minibatches(n: usize, m: usize) -> Vec<Range<usize>> {
    assert!(m >= 1 && m <= n, "need 1 <= m <= n, got m = {m}, n = {n}");
    let (base, extra) = (n / m, n % m);
    let mut start = 0;
    (0..m)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Hessian `(m/n) sum_{j in batch} a_j a_j^T` of the batch loss
/// `f_i(x) = (m/(2n)) sum_{j in batch} (a_j^T x - b_j)^2`, so that `F = (1/m) sum_i f_i + (mu/2)||x||^2`.
/// Each product reads every row of the batch once.
pub struct BatchHessian<'a> {
    pub data: &'a RegressionDataset,
    pub range: Range<usize>,
    pub weight: f64,
    pub ledger: &'a OracleLedger,
}

impl<'a> BatchHessian<'a> {
    pub fn new(data: &'a RegressionDataset, range: Range<usize>, m: usize, ledger: &'a OracleLedger) -> Self {
        Self {
            weight: m as f64 / data.n() as f64,
            data,
            range,
            ledger,
        }
    }
}

impl LinearOperator for BatchHessian<'_> {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.data.normal_apply_add(self.range.clone(), self.weight, x, out, self.ledger);
    }
}

/// `n^{1/6} mu^{1/3}`, the level every batch Hessian is deflated to.
pub fn target_level(n: usize, mu: f64) -> f64 {
    (n as f64).powf(1.0 / 6.0) * mu.cbrt()
}

#[derive(Debug, Clone)]
pub struct BatchDeflationSet {
    pub batches: Vec<Range<usize>>,
    pub deflations: Vec<LowRankDeflation>,
    pub target_level: f64,
    /// Last Rayleigh value of each batch extraction.
    pub last_rayleigh: Vec<f64>,
    /// Batches whose extraction failed and fell back to no deflation.
    pub failed: Vec<usize>,
}

impl BatchDeflationSet {
    /// No deflation on any batch.
    pub fn empty(d: usize, batches: Vec<Range<usize>>, target_level: f64) -> Self {
        let m = batches.len();
        Self {
            deflations: vec![LowRankDeflation::empty(d); m],
            last_rayleigh: vec![f64::NAN; m],
            failed: Vec::new(),
            batches,
            target_level,
        }
    }

    pub fn m(&self) -> usize {
        self.batches.len()
    }

    pub fn total_rank(&self) -> usize {
        self.deflations.iter().map(LowRankDeflation::rank).sum()
    }

    /// `sum_i A_i` as one factored deflation.
    pub fn combined(&self, d: usize) -> LowRankDeflation {
        LowRankDeflation::concat(d, &self.deflations)
    }
}

/// Deflates each batch Hessian until its Rayleigh value drops to `target`, batches in parallel.
/// Extraction products read the batch rows and are charged as data accesses.
pub fn batch_deflate(
    data: &RegressionDataset,
    batches: Vec<Range<usize>>,
    target: f64,
    seed: u64,
    ledger: &OracleLedger,
) -> Result<BatchDeflationSet> {
    let m = batches.len();
    let d = data.d();
    let results: Vec<_> = batches
        .par_iter()
        .enumerate()
        .map(|(i, range)| {
            let local = OracleLedger::new();
            let op = BatchHessian::new(data, range.clone(), m, &local);
            let mut cfg = ExtractorConfig::for_accuracy(target, d);
            cfg.seed = seed.wrapping_add(i as u64 * 7919);
            let out = eigen_extract_op(&op, &cfg, ExtractMode::TargetLevel { lambda_l: 0.25 * target });
            (out, local.snapshot())
        })
        .collect();
    let mut set = BatchDeflationSet::empty(d, batches, target);
    for (i, (out, snap)) in results.into_iter().enumerate() {
        ledger.absorb(&snap);
        match out {
            Ok(ex) => {
                // The extractor also keeps the final pair that is already below the level.
                let mut kept = LowRankDeflation::empty(d);
                for (&a, v) in ex.deflation.coeffs().iter().zip(ex.deflation.vecs()) {
                    if a > target {
                        kept.push(a, v.clone())?;
                    }
                }
                debug!("batch {i}: rank {} last rayleigh {:.3e}", kept.rank(), ex.last_rayleigh());
                set.last_rayleigh[i] = ex.last_rayleigh();
                set.deflations[i] = kept;
            }
            Err(e) => {
                warn!("batch {i}: extraction failed ({e}); using no deflation");
                set.failed.push(i);
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let sizes = |n, m| partition_minibatches(n, m).iter().map(|r| r.len()).collect::<Vec<_>>();
        assert_eq!(sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(sizes(4096, 64), vec![64; 64]);
        assert_eq!(sizes(7, 7), vec![1; 7]);
    }

    #[test]
    fn level_formula() {
        assert!((target_level(64, 1e-3) - 0.2).abs() < 1e-12);
    }
}
