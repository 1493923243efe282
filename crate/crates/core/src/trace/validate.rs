use std::fmt;

use serde::Serialize;

use super::{BarrierKind, EventKind, Location, Scope, ThreadId, Trace};
use crate::sync::scope_pair_overlaps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    EventAfterEnd,
    ReentrantAcquire,
    MutualExclusion,
    UnheldRelease,
    ImproperNesting,
    ReleaseScopeMismatch,
    ExitHoldingLock,
    BarrierDivergence,
    EmptyBarrier,
    ThreadOutOfRange,
    ForeignShared,
}

impl DiagnosticKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagnosticKind::EventAfterEnd => "event after end",
            DiagnosticKind::ReentrantAcquire => "reentrant acquire",
            DiagnosticKind::MutualExclusion => "overlapping critical sections held concurrently",
            DiagnosticKind::UnheldRelease => "release of unheld lock",
            DiagnosticKind::ImproperNesting => "improperly nested release",
            DiagnosticKind::ReleaseScopeMismatch => "release scope differs from acquire scope",
            DiagnosticKind::ExitHoldingLock => "exit while holding lock",
            DiagnosticKind::BarrierDivergence => "barrier divergence",
            DiagnosticKind::EmptyBarrier => "barrier without participants",
            DiagnosticKind::ThreadOutOfRange => "thread outside launch configuration",
            DiagnosticKind::ForeignShared => "shared location of another block",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub event: usize,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.event, self.kind.as_str())
    }
}

/// Checks the well-formedness invariants of a trace. An empty result means
/// the trace can be handed to any detector or to the oracle.
pub fn validate_trace(trace: &Trace) -> Vec<Diagnostic> {
    let cfg = trace.config;
    let n = cfg.thread_count();
    let mut ended = vec![false; n];
    let mut stacks: Vec<Vec<(u64, Scope)>> = vec![Vec::new(); n];
    // (holder, lock, scope) for every currently held lock
    let mut held: Vec<(ThreadId, u64, Scope)> = Vec::new();
    let mut out = Vec::new();

    for (i, ev) in trace.events.iter().enumerate() {
        let mut diag = |kind| out.push(Diagnostic { event: i, kind });
        if let Some(tid) = ev.tid() {
            if !cfg.contains(tid) {
                diag(DiagnosticKind::ThreadOutOfRange);
                continue;
            }
            if ended[cfg.index(tid)] {
                diag(DiagnosticKind::EventAfterEnd);
                continue;
            }
        }
        match ev {
            EventKind::Access { tid, loc, .. } => {
                if let Location::Shared { block, .. } = loc {
                    if *block != tid.block {
                        diag(DiagnosticKind::ForeignShared);
                    }
                }
            }
            EventKind::Acquire { tid, lock, scope } => {
                let stack = &mut stacks[cfg.index(*tid)];
                if stack.iter().any(|(l, _)| l == lock) {
                    diag(DiagnosticKind::ReentrantAcquire);
                    continue;
                }
                if held
                    .iter()
                    .any(|(u, l, s)| u != tid && l == lock && scope_pair_overlaps(*s, *scope))
                {
                    diag(DiagnosticKind::MutualExclusion);
                }
                stack.push((*lock, *scope));
                held.push((*tid, *lock, *scope));
            }
            EventKind::Release { tid, lock, scope } => {
                let stack = &mut stacks[cfg.index(*tid)];
                match stack.iter().rposition(|(l, _)| l == lock) {
                    None => diag(DiagnosticKind::UnheldRelease),
                    Some(pos) => {
                        if pos + 1 != stack.len() {
                            diag(DiagnosticKind::ImproperNesting);
                        }
                        let (_, acquired) = stack.remove(pos);
                        if acquired != *scope {
                            diag(DiagnosticKind::ReleaseScopeMismatch);
                        }
                        held.retain(|(u, l, _)| !(u == tid && l == lock));
                    }
                }
            }
            EventKind::End { tid } => {
                let idx = cfg.index(*tid);
                if !stacks[idx].is_empty() {
                    diag(DiagnosticKind::ExitHoldingLock);
                }
                ended[idx] = true;
            }
            EventKind::Fence { .. } => {}
            EventKind::Barrier(kind) => {
                let (block, warp) = match kind {
                    BarrierKind::Block { block, .. } => (*block, 0),
                    BarrierKind::Warp { block, warp, .. } => (*block, *warp),
                };
                if !cfg.contains(ThreadId::new(block, warp, 0)) {
                    diag(DiagnosticKind::ThreadOutOfRange);
                    continue;
                }
                let members = super::barrier_members(&cfg, kind, &ended);
                if members.is_empty() {
                    diag(DiagnosticKind::EmptyBarrier);
                    continue;
                }
                let live_outside = match kind {
                    // every live thread of the block must arrive
                    BarrierKind::Block { .. } => cfg
                        .block_threads(block)
                        .any(|t| !ended[cfg.index(t)] && !members.contains(&t)),
                    BarrierKind::Warp { .. } => false,
                };
                let dead_inside = members.iter().any(|t| ended[cfg.index(*t)]);
                if live_outside || dead_inside {
                    diag(DiagnosticKind::BarrierDivergence);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_trace;
    use super::*;

    fn kinds(text: &str) -> Vec<DiagnosticKind> {
        validate_trace(&parse_trace(text).unwrap()).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn reentrant_acquire_is_reported() {
        let t = "config blocks=1 warps=1 lanes=2\n0.0.0 acq 0x1 device\n0.0.0 acq 0x1 device\n";
        assert_eq!(kinds(t), vec![DiagnosticKind::ReentrantAcquire]);
    }

    #[test]
    fn barrier_missing_a_live_thread_diverges() {
        let t = "config blocks=1 warps=2 lanes=2\nbar block 0 0x3,0x1\n";
        assert_eq!(kinds(t), vec![DiagnosticKind::BarrierDivergence]);
        // once 0.1.1 has exited the same arrival set is complete
        let t = "config blocks=1 warps=2 lanes=2\n0.1.1 end\nbar block 0 0x3,0x1\n";
        assert!(kinds(t).is_empty());
    }

    #[test]
    fn well_formed_litmus_has_no_diagnostics() {
        let t = "config blocks=1 warps=2 lanes=1\n\
                 0.0.0 wr g:0x10\n0.0.0 acq 0x1 device\n0.0.0 rd g:0x20\n0.0.0 rel 0x1 device\n\
                 0.1.0 acq 0x1 device\n0.1.0 rd g:0x20\n0.1.0 rel 0x1 device\n0.1.0 wr g:0x10\n\
                 bar block 0\n0.0.0 end\n0.1.0 end\n";
        assert!(kinds(t).is_empty());
    }

    #[test]
    fn lock_discipline_violations() {
        let t = "config blocks=2 warps=1 lanes=1\n\
                 0.0.0 rel 0x1 device\n\
                 0.0.0 acq 0x1 block\n1.0.0 acq 0x1 block\n\
                 1.0.0 rel 0x1 device\n\
                 1.0.0 acq 0x2 device\n1.0.0 acq 0x1 device\n1.0.0 rel 0x2 device\n\
                 0.0.0 end\n0.0.0 wr g:0x1\n";
        assert_eq!(
            kinds(t),
            vec![
                DiagnosticKind::UnheldRelease,
                DiagnosticKind::ReleaseScopeMismatch,
                DiagnosticKind::MutualExclusion,
                DiagnosticKind::ImproperNesting,
                DiagnosticKind::ExitHoldingLock,
                DiagnosticKind::EventAfterEnd,
            ]
        );
    }

    #[test]
    fn warp_barrier_with_exited_lane_diverges() {
        let t = "config blocks=1 warps=1 lanes=4\n0.0.2 end\nbar warp 0 0 0x7\nbar warp 0 0 0x3\n";
        assert_eq!(validate_trace(&parse_trace(t).unwrap()), vec![Diagnostic { event: 1, kind: DiagnosticKind::BarrierDivergence }]);
    }
}
