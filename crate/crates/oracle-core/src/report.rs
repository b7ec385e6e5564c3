use std::fmt;

use crate::ledger::{LedgerSnapshot, OracleLedger};

/// Which solver path produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    ProxAgd,
    Agd,
    Cg,
    NotApplicable,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::ProxAgd => "prox-agd",
            Branch::Agd => "agd",
            Branch::Cg => "cg",
            Branch::NotApplicable => "n/a",
        })
    }
}

/// One sample of solver progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iter: usize,
    pub ledger: LedgerSnapshot,
    pub objective: f64,
    pub residual: f64,
}

/// Progress samples. A sample is kept only if the ledger advanced since the
/// previous one, so the oracle counts along a trace are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace(Vec<TracePoint>);

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, iter: usize, ledger: &OracleLedger, objective: f64, residual: f64) {
        let snap = ledger.snapshot();
        if let Some(last) = self.0.last() {
            if snap.total() <= last.ledger.total() {
                return;
            }
        }
        if objective.is_finite() {
            self.0.push(TracePoint {
                iter,
                ledger: snap,
                objective,
                residual,
            });
        }
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.0.last()
    }

    /// Appends another trace, dropping samples that would break monotonicity.
    pub fn extend(&mut self, other: &Trace) {
        for p in &other.0 {
            let ok = self.0.last().map_or(true, |l| p.ledger.total() > l.ledger.total());
            if ok {
                self.0.push(*p);
            }
        }
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub x_hat: Vec<f64>,
    pub objective: f64,
    pub ledger_snapshot: LedgerSnapshot,
    pub iterations: usize,
    pub trace: Trace,
    pub branch: Branch,
    /// Final value of the solver's own stopping measure (gradient norm, residual, ...).
    pub residual: f64,
}

impl SolverReport {
    pub fn grad_calls(&self) -> u64 {
        self.ledger_snapshot.grad_calls
    }
}
