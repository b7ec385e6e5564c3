use std::sync::atomic::{AtomicU64, Ordering};

/// Monotone oracle counters owned by one solver run.
#[derive(Debug, Default)]
pub struct OracleLedger {
    grad_calls: AtomicU64,
    hvp_calls: AtomicU64,
    data_accesses: AtomicU64,
}

/// Plain copy of the ledger counters at one moment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub grad_calls: u64,
    pub hvp_calls: u64,
    pub data_accesses: u64,
}

impl LedgerSnapshot {
    /// Counter-wise difference `self - earlier`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            grad_calls: self.grad_calls - earlier.grad_calls,
            hvp_calls: self.hvp_calls - earlier.hvp_calls,
            data_accesses: self.data_accesses - earlier.data_accesses,
        }
    }

    /// Gradient calls plus HVP calls, the unit used for second-order methods.
    pub fn gradient_equivalents(&self) -> u64 {
        self.grad_calls + self.hvp_calls
    }

    pub fn total(&self) -> u64 {
        self.grad_calls + self.hvp_calls + self.data_accesses
    }
}

impl OracleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_grad(&self, n: u64) {
        self.grad_calls.fetch_add(n, Ordering::Relaxed);
    }

    pub fn record_hvp(&self, n: u64) {
        self.hvp_calls.fetch_add(n, Ordering::Relaxed);
    }

    pub fn record_data(&self, n: u64) {
        self.data_accesses.fetch_add(n, Ordering::Relaxed);
    }

    pub fn grad_calls(&self) -> u64 {
        self.grad_calls.load(Ordering::Relaxed)
    }

    pub fn hvp_calls(&self) -> u64 {
        self.hvp_calls.load(Ordering::Relaxed)
    }

    pub fn data_accesses(&self) -> u64 {
        self.data_accesses.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            grad_calls: self.grad_calls(),
            hvp_calls: self.hvp_calls(),
            data_accesses: self.data_accesses(),
        }
    }

    /// Adds the counts of another run (used when batches run on private ledgers).
    pub fn absorb(&self, other: &LedgerSnapshot) {
        self.record_grad(other.grad_calls);
        self.record_hvp(other.hvp_calls);
        self.record_data(other.data_accesses);
    }
}
