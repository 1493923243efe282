use std::collections::BTreeSet;

use super::{Diagnostic, DiagnosticKind, EventKind, Trace};

/// Result of recovering ad-hoc lock operations from raw atomics and fences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inferred {
    pub trace: Trace,
    pub diagnostics: Vec<Diagnostic>,
}

enum Rewrite {
    Keep,
    Drop,
    Replace(EventKind),
}

/// Rewrites the ad-hoc lock idiom into explicit lock operations.
///
/// Per thread: an atomic write to `a` immediately followed by a fence is an
/// acquire of lock `a`; a fence immediately followed by an atomic write to a
/// held lock `a` is its release. The lock operation takes the position of the
/// atomic and the fence is dropped. The operation is device-scoped only when
/// both the atomic and the fence are. A fence + atomic pair naming a lock the
/// thread does not hold is reported and left as is.
pub fn infer_locks(trace: &Trace) -> Inferred {
    let cfg = trace.config;
    let mut per_thread: Vec<Vec<usize>> = vec![Vec::new(); cfg.thread_count()];
    for (i, ev) in trace.events.iter().enumerate() {
        if let Some(tid) = ev.tid() {
            if cfg.contains(tid) {
                per_thread[cfg.index(tid)].push(i);
            }
        }
    }

    let mut rewrites: Vec<Rewrite> = trace.events.iter().map(|_| Rewrite::Keep).collect();
    let mut diagnostics = Vec::new();
    for seq in &per_thread {
        let mut held = BTreeSet::new();
        let mut k = 0;
        while k < seq.len() {
            let cur = &trace.events[seq[k]];
            let next = seq.get(k + 1).map(|&j| &trace.events[j]);
            let after = seq.get(k + 2).map(|&j| &trace.events[j]);
            match (cur, next) {
                (EventKind::Fence { scope: fs, .. }, Some(EventKind::Access { tid, loc, write: true, atomic: Some(s), .. })) => {
                    let lock = loc.addr();
                    if held.remove(&lock) {
                        rewrites[seq[k]] = Rewrite::Drop;
                        rewrites[seq[k + 1]] =
                            Rewrite::Replace(EventKind::Release { tid: *tid, lock, scope: s.narrowest(*fs) });
                        k += 2;
                        continue;
                    }
                    // fence; atomic; fence starts an acquire instead
                    if !matches!(after, Some(EventKind::Fence { .. })) {
                        diagnostics.push(Diagnostic { event: seq[k + 1], kind: DiagnosticKind::UnheldRelease });
                        k += 2;
                        continue;
                    }
                }
                (EventKind::Access { tid, loc, write: true, atomic: Some(s), .. }, Some(EventKind::Fence { scope: fs, .. })) => {
                    let lock = loc.addr();
                    if !held.contains(&lock) {
                        held.insert(lock);
                        rewrites[seq[k]] =
                            Rewrite::Replace(EventKind::Acquire { tid: *tid, lock, scope: s.narrowest(*fs) });
                        rewrites[seq[k + 1]] = Rewrite::Drop;
                        k += 2;
                        continue;
                    }
                }
                _ => {}
            }
            k += 1;
        }
    }

    let events = trace
        .events
        .iter()
        .zip(rewrites)
        .filter_map(|(ev, rw)| match rw {
            Rewrite::Keep => Some(ev.clone()),
            Rewrite::Drop => None,
            Rewrite::Replace(e) => Some(e),
        })
        .collect();
    Inferred { trace: Trace { config: cfg, events }, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_trace, Scope, ThreadId};
    use super::*;

    const T0: ThreadId = ThreadId::new(0, 0, 0);

    fn infer(body: &str) -> Inferred {
        infer_locks(&parse_trace(&format!("config blocks=1 warps=2 lanes=2\n{body}")).unwrap())
    }

    #[test]
    fn block_atomic_with_device_fence_is_block_acquire() {
        let r = infer("0.0.0 wr g:0x40 atomic block\n0.0.0 fence device\n");
        assert_eq!(r.trace.events, vec![EventKind::Acquire { tid: T0, lock: 0x40, scope: Scope::Block(0) }]);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn device_fence_then_device_atomic_releases() {
        let r = infer(
            "0.0.0 wr g:0x40 atomic device\n0.0.0 fence device\n0.0.0 wr g:0x8\n\
             0.0.0 fence device\n0.0.0 wr g:0x40 atomic device\n",
        );
        assert_eq!(
            r.trace.events,
            vec![
                EventKind::Acquire { tid: T0, lock: 0x40, scope: Scope::Device },
                EventKind::Access { tid: T0, loc: crate::trace::Location::Global(8), write: true, atomic: None, instr: None },
                EventKind::Release { tid: T0, lock: 0x40, scope: Scope::Device },
            ]
        );
    }

    #[test]
    fn lone_atomic_stays_an_access() {
        let t = parse_trace("config blocks=1 warps=1 lanes=1\n0.0.0 wr g:0x40 atomic device\n").unwrap();
        let r = infer_locks(&t);
        assert_eq!(r.trace, t);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn release_of_unheld_lock_is_left_alone() {
        let r = infer("0.0.0 fence device\n0.0.0 wr g:0x40 atomic device\n");
        assert_eq!(r.trace.events.len(), 2);
        assert_eq!(r.diagnostics, vec![Diagnostic { event: 1, kind: DiagnosticKind::UnheldRelease }]);
    }

    #[test]
    fn other_threads_interleave_between_atomic_and_fence() {
        let r = infer("0.0.0 wr g:0x40 atomic block\n0.1.0 wr g:0x8\n0.0.0 fence block\n");
        assert_eq!(r.trace.events.len(), 2);
        assert!(matches!(r.trace.events[0], EventKind::Acquire { .. }));
    }
}
