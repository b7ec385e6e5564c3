//! Mini-batch ridge regression with per-batch deflation.
//!
//! The `n` rows are split into `m = ceil(sqrt(n))` batches. Each batch Hessian is
//! deflated down to the level `n^{1/6} mu^{1/3}`, and Katyusha runs on the
//! deflated components with the removed parts moved into the proximal term.
//! Costs are counted in row reads.

pub mod batches;
pub mod dataset;
pub mod katyusha;

pub use batches::{batch_deflate, partition_minibatches, target_level, BatchDeflationSet, BatchHessian};
pub use dataset::RegressionDataset;
pub use katyusha::{agd_baseline, default_l_bar, katyusha_solve, ErmReport, KatyushaConfig};

use log::info;
use oracle_core::{OptError, OracleLedger, Result};
use rand::seq::SliceRandom;

#[derive(Debug, Clone)]
pub struct ErmConfig {
    pub eps: f64,
    /// Batch count; `None` uses `ceil(sqrt(n))`.
    pub batches: Option<usize>,
    /// Shuffle rows with this seed before batching; batches are contiguous otherwise.
    pub shuffle: Option<u64>,
    /// Skip deflation and run plain Katyusha on the batches.
    pub no_deflation: bool,
    pub katyusha: KatyushaConfig,
    pub seed: u64,
}

impl ErmConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            batches: None,
            shuffle: None,
            no_deflation: false,
            katyusha: KatyushaConfig::new(eps),
            seed: 0,
        }
    }
}

/// Partition, deflate and run Katyusha. The dataset must be normalized.
pub fn erm_solve(data: &RegressionDataset, cfg: &ErmConfig, ledger: &OracleLedger) -> Result<ErmReport> {
    if data.max_row_norm() > 1.0 + 1e-12 {
        return Err(OptError::InvalidParameter("rows must satisfy ||a_i|| <= 1; normalize first".into()));
    }
    let shuffled;
    let data = match cfg.shuffle {
        Some(seed) => {
            let mut perm: Vec<usize> = (0..data.n()).collect();
            perm.shuffle(&mut oracle_core::rng::seeded_rng(seed));
            shuffled = data.permuted(&perm)?;
            &shuffled
        }
        None => data,
    };
    let n = data.n();
    let m = cfg.batches.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).clamp(1, n);
    let ranges = partition_minibatches(n, m);
    let level = target_level(n, data.mu);
    let set = if cfg.no_deflation {
        BatchDeflationSet::empty(data.d(), ranges, level)
    } else {
        batch_deflate(data, ranges, level, cfg.seed, ledger)?
    };
    let extraction_reads = ledger.data_accesses();
    info!(
        "erm: n={n} m={m} level={level:.3e} rank={} extraction reads={extraction_reads}",
        set.total_rank()
    );
    let mut kcfg = cfg.katyusha.clone();
    kcfg.eps = cfg.eps;
    katyusha_solve(data, &set, &kcfg, ledger)
}
