//! Exhaustive search over correct reorderings of a small trace.
//!
//! A state is the per-thread cursor vector plus the last writer of every
//! location. From a state a thread may take its next event when that keeps
//! the reordering correct: reads must see their original writer, acquires
//! must not overlap a lock instance held by another thread, and a barrier
//! fires only once every participant has reached it. At every reachable
//! state, conflicting accesses that are simultaneously next in their threads
//! form a predictable race.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::sync::{atomics_cover, scope_pair_overlaps};
use crate::trace::{EventKind, Location, Scope, ThreadId, Trace};

pub const DEFAULT_LIMIT: usize = 20;
pub const DEFAULT_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("trace has {len} events, above the oracle limit of {limit}")]
    TooLarge { len: usize, limit: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    /// Racing event-index pairs `(i, j)` with `i < j`.
    pub pairs: BTreeSet<(usize, usize)>,
    /// False when the state budget ran out before the search finished.
    pub complete: bool,
    pub states: usize,
}

impl OracleResult {
    pub fn has_race(&self) -> bool {
        !self.pairs.is_empty()
    }
}

struct Access {
    loc: usize,
    write: bool,
    atomic: Option<Scope>,
    tid: ThreadId,
    /// Original writer this read observed (`None` = initial value).
    reads_from: Option<usize>,
}

struct Model {
    /// Event indices of each thread, barriers included for participants.
    seqs: Vec<Vec<usize>>,
    access: BTreeMap<usize, Access>,
    /// For every thread and cursor: the lock instances held at that point.
    held: Vec<Vec<Vec<(u64, Scope)>>>,
    /// Threads (by sequence index) taking part in each barrier.
    members: BTreeMap<usize, Vec<usize>>,
}

impl Model {
    fn build(trace: &Trace) -> Model {
        let cfg = trace.config;
        let participants = trace.barrier_participants();
        let mut seqs = vec![Vec::new(); cfg.thread_count()];
        let mut members = BTreeMap::new();
        let mut loc_ids: BTreeMap<Location, usize> = BTreeMap::new();
        let mut last_writer: BTreeMap<usize, usize> = BTreeMap::new();
        let mut access = BTreeMap::new();
        for (i, ev) in trace.events.iter().enumerate() {
            match *ev {
                EventKind::Barrier(_) => {
                    let ms: Vec<usize> = participants[i].iter().map(|&t| cfg.index(t)).collect();
                    for &m in &ms {
                        seqs[m].push(i);
                    }
                    members.insert(i, ms);
                }
                _ => {
                    let tid = ev.tid().expect("non-barrier events have a thread");
                    seqs[cfg.index(tid)].push(i);
                    if let EventKind::Access { loc, write, atomic, .. } = *ev {
                        let n = loc_ids.len();
                        let id = *loc_ids.entry(loc).or_insert(n);
                        let reads_from = if write { None } else { last_writer.get(&id).copied() };
                        if write {
                            last_writer.insert(id, i);
                        }
                        access.insert(i, Access { loc: id, write, atomic, tid, reads_from });
                    }
                }
            }
        }
        let held = seqs
            .iter()
            .map(|seq| {
                let mut cur: Vec<(u64, Scope)> = Vec::new();
                let mut out = vec![cur.clone()];
                for &i in seq {
                    match trace.events[i] {
                        EventKind::Acquire { lock, scope, .. } => cur.push((lock, scope)),
                        EventKind::Release { lock, .. } => cur.retain(|(l, _)| *l != lock),
                        _ => {}
                    }
                    out.push(cur.clone());
                }
                out
            })
            .collect();
        Model { seqs, access, held, members }
    }

    fn next(&self, cursors: &[u16], t: usize) -> Option<usize> {
        self.seqs[t].get(cursors[t] as usize).copied()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    cursors: Vec<u16>,
    /// Last writer per location id; `u32::MAX` is the initial value.
    writers: Vec<u32>,
}

const INITIAL: u32 = u32::MAX;

/// Returns every conflicting pair some correct reordering of `trace` makes
/// co-enabled. The trace must be valid and at most `limit` events long.
pub fn predictable_races(trace: &Trace, limit: usize, budget: usize) -> Result<OracleResult, OracleError> {
    if trace.len() > limit {
        return Err(OracleError::TooLarge { len: trace.len(), limit });
    }
    let model = Model::build(trace);
    let nlocs = model.access.values().map(|a| a.loc + 1).max().unwrap_or(0);
    let init = State { cursors: vec![0; model.seqs.len()], writers: vec![INITIAL; nlocs] };
    let mut seen: HashSet<State> = HashSet::new();
    let mut stack = vec![init.clone()];
    seen.insert(init);
    let mut pairs = BTreeSet::new();
    let mut complete = true;
    let threads = model.seqs.len();

    while let Some(st) = stack.pop() {
        let nexts: Vec<Option<usize>> = (0..threads).map(|t| model.next(&st.cursors, t)).collect();
        for a in 0..threads {
            let Some(ea) = nexts[a].and_then(|e| model.access.get(&e).map(|x| (e, x))) else { continue };
            for b in a + 1..threads {
                let Some((eb, xb)) = nexts[b].and_then(|e| model.access.get(&e).map(|x| (e, x))) else { continue };
                let (ea, xa) = ea;
                if xa.loc == xb.loc && (xa.write || xb.write) && !atomics_cover(xa.atomic, xb.atomic, xa.tid, xb.tid) {
                    pairs.insert((ea.min(eb), ea.max(eb)));
                }
            }
        }
        for t in 0..threads {
            let Some(e) = nexts[t] else { continue };
            let Some(succ) = step(trace, &model, &st, t, e) else { continue };
            if seen.contains(&succ) {
                continue;
            }
            if seen.len() >= budget {
                complete = false;
                continue;
            }
            seen.insert(succ.clone());
            stack.push(succ);
        }
    }
    Ok(OracleResult { pairs, complete, states: seen.len() })
}

fn step(trace: &Trace, model: &Model, st: &State, t: usize, e: usize) -> Option<State> {
    let mut succ = st.clone();
    match trace.events[e] {
        EventKind::Access { .. } => {
            let a = &model.access[&e];
            if a.write {
                succ.writers[a.loc] = e as u32;
            } else if st.writers[a.loc] != a.reads_from.map_or(INITIAL, |w| w as u32) {
                return None;
            }
            succ.cursors[t] += 1;
        }
        EventKind::Acquire { lock, scope, .. } => {
            let blocked = (0..model.seqs.len()).any(|u| {
                u != t
                    && model.held[u][st.cursors[u] as usize]
                        .iter()
                        .any(|&(l, s)| l == lock && scope_pair_overlaps(s, scope))
            });
            if blocked {
                return None;
            }
            succ.cursors[t] += 1;
        }
        EventKind::Barrier(_) => {
            let members = &model.members[&e];
            // fire once, from the lowest participant
            if members.first() != Some(&t) || members.iter().any(|&u| model.next(&st.cursors, u) != Some(e)) {
                return None;
            }
            for &u in members {
                succ.cursors[u] += 1;
            }
        }
        EventKind::Release { .. } | EventKind::Fence { .. } | EventKind::End { .. } => succ.cursors[t] += 1,
    }
    Some(succ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    fn races(text: &str) -> BTreeSet<(usize, usize)> {
        predictable_races(&parse_trace(text).unwrap(), DEFAULT_LIMIT, DEFAULT_BUDGET).unwrap().pairs
    }

    #[test]
    fn unordered_writes_race() {
        assert_eq!(races("config blocks=1 warps=2 lanes=1\n0.0.0 wr g:0x1\n0.1.0 wr g:0x1\n"), BTreeSet::from([(0, 1)]));
    }

    #[test]
    fn barrier_separated_writes_do_not_race() {
        assert!(races("config blocks=1 warps=2 lanes=1\n0.0.0 wr g:0x1\nbar block 0\n0.1.0 wr g:0x1\n").is_empty());
    }

    #[test]
    fn lock_protected_accesses_do_not_race() {
        let t = "config blocks=1 warps=2 lanes=1\n0.0.0 acq 0x9 device\n0.0.0 wr g:0x1\n0.0.0 rel 0x9 device\n\
                 0.1.0 acq 0x9 device\n0.1.0 wr g:0x1\n0.1.0 rel 0x9 device\n";
        assert!(races(t).is_empty());
    }

    #[test]
    fn reads_from_is_preserved() {
        // the read of y observes the write of y, so x cannot be reordered
        let t = "config blocks=1 warps=2 lanes=1\n0.0.0 wr g:0x1\n0.0.0 wr g:0x2\n0.1.0 rd g:0x2\n0.1.0 wr g:0x1\n";
        assert_eq!(races(t), BTreeSet::from([(1, 2)]));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let t = parse_trace("config blocks=1 warps=2 lanes=1\n0.0.0 wr g:0x1\n0.1.0 wr g:0x2\n0.0.0 wr g:0x3\n").unwrap();
        let r = predictable_races(&t, DEFAULT_LIMIT, 2).unwrap();
        assert!(!r.complete);
        assert!(predictable_races(&t, 2, DEFAULT_BUDGET).is_err());
    }

    /// Hand-checked: after `e2` the pair (e0, e3) is co-next; after `e0` the
    /// pair (e1, e2) is. Nothing else conflicts.
    #[test]
    fn agrees_with_hand_enumeration() {
        let t = parse_trace("config blocks=1 warps=2 lanes=1\n0.0.0 wr g:0x1\n0.0.0 rd g:0x2\n0.1.0 wr g:0x2\n0.1.0 rd g:0x1\n").unwrap();
        let r = predictable_races(&t, DEFAULT_LIMIT, DEFAULT_BUDGET).unwrap();
        assert!(r.pairs.contains(&(0, 3)));
        assert!(r.pairs.contains(&(1, 2)));
        assert_eq!(r.pairs.len(), 2);
    }
}
