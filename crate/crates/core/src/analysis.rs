//! Front door: prepare a parsed trace and run every analysis on it.

use serde::Serialize;

use crate::detect::{detect, Options};
use crate::oracle::{predictable_races, OracleResult};
use crate::report::DetectorKind;
use crate::trace::{infer_locks, validate_trace, Diagnostic, Trace};
use crate::workloads::Verdicts;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prepared {
    pub trace: Trace,
    /// Lock operations were recovered from atomics and fences.
    pub inferred: bool,
    /// Non-fatal findings of lock inference.
    pub warnings: Vec<Diagnostic>,
}

/// Infers ad-hoc locks when the trace has no explicit lock operations, then
/// validates. Validation diagnostics are returned as the error.
pub fn prepare_trace(trace: Trace) -> Result<Prepared, Vec<Diagnostic>> {
    let (trace, inferred, warnings) = if trace.has_lock_ops() {
        (trace, false, Vec::new())
    } else {
        let out = infer_locks(&trace);
        let inferred = out.trace.has_lock_ops();
        (out.trace, inferred, out.diagnostics)
    };
    let diags = validate_trace(&trace);
    if diags.is_empty() {
        Ok(Prepared { trace, inferred, warnings })
    } else {
        Err(diags)
    }
}

/// Report counts of every detector plus the oracle's pair count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub gwcp: usize,
    pub hb: usize,
    pub lockset: usize,
    /// `None` when the trace exceeds the oracle's event limit.
    pub oracle: Option<usize>,
    pub oracle_complete: bool,
}

impl Comparison {
    pub fn verdicts(&self) -> Option<Verdicts> {
        Some(Verdicts { gwcp: self.gwcp > 0, hb: self.hb > 0, lockset: self.lockset > 0, oracle: self.oracle? > 0 })
    }
}

pub fn compare(trace: &Trace, opts: &Options, limit: usize, budget: usize) -> Comparison {
    let count = |d| detect(trace, d, opts).len();
    let oracle: Option<OracleResult> = predictable_races(trace, limit, budget).ok();
    Comparison {
        gwcp: count(DetectorKind::Gwcp),
        hb: count(DetectorKind::Hb),
        lockset: count(DetectorKind::Lockset),
        oracle: oracle.as_ref().map(|o| o.pairs.len()),
        oracle_complete: oracle.is_none_or(|o| o.complete),
    }
}
