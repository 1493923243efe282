use std::collections::BTreeMap;

use crate::report::{AccessRef, DetectorKind, RaceKind, RaceReport, ReportSink, SameInstrCheck};
use crate::sync::{atomics_cover, scope_pair_overlaps};
use crate::trace::{AccessAttr, Config, EventKind, Location, Scope, ThreadId, Trace};

#[derive(Clone, Debug)]
struct Rec {
    at: AccessRef,
    held: Vec<(u64, Scope)>,
    atomic: AccessAttr,
    write: bool,
}

#[derive(Debug, Default)]
struct LocMeta {
    write: Option<Rec>,
    readers: BTreeMap<ThreadId, Rec>,
}

/// Scoped lockset baseline with barrier ordering and a fence fallback for
/// unprotected accesses. Acquires and releases count as fences of their
/// scope.
#[derive(Debug)]
pub struct Lockset {
    cfg: Config,
    warp_granularity: bool,
    held: Vec<Vec<(u64, Scope)>>,
    fences: Vec<Vec<(usize, Scope)>>,
    barriers: Vec<Vec<usize>>,
    locs: BTreeMap<Location, LocMeta>,
    same_instr: SameInstrCheck,
    sink: ReportSink,
}

impl Lockset {
    pub fn new(cfg: Config, warp_granularity: bool) -> Self {
        let n = cfg.thread_count();
        Lockset {
            cfg,
            warp_granularity,
            held: vec![Vec::new(); n],
            fences: vec![Vec::new(); n],
            barriers: vec![Vec::new(); n],
            locs: BTreeMap::new(),
            same_instr: SameInstrCheck::default(),
            sink: ReportSink::new(DetectorKind::Lockset),
        }
    }

    pub fn run(mut self, trace: &Trace) -> Vec<RaceReport> {
        let participants = trace.barrier_participants();
        for (i, ev) in trace.events.iter().enumerate() {
            self.step(i, ev, &participants[i]);
        }
        self.sink.reports
    }

    fn who(&self, t: ThreadId) -> ThreadId {
        if self.warp_granularity {
            ThreadId::new(t.block, t.warp, 0)
        } else {
            t
        }
    }

    fn step(&mut self, index: usize, ev: &EventKind, participants: &[ThreadId]) {
        let cfg = self.cfg;
        if !ev.is_access() {
            self.same_instr.observe(None, &mut self.sink);
        }
        match *ev {
            EventKind::Access { tid, loc, write, atomic, instr } => {
                let rec = Rec {
                    at: AccessRef { event: index, tid, instr },
                    held: self.held[cfg.index(tid)].clone(),
                    atomic,
                    write,
                };
                self.same_instr.observe(Some((&rec.at, loc, write)), &mut self.sink);
                self.on_access(loc, rec);
            }
            EventKind::Acquire { tid, lock, scope } => {
                self.held[cfg.index(tid)].push((lock, scope));
                self.fences[cfg.index(tid)].push((index, scope));
            }
            EventKind::Release { tid, lock, scope } => {
                self.held[cfg.index(tid)].retain(|(l, _)| *l != lock);
                self.fences[cfg.index(tid)].push((index, scope));
            }
            EventKind::Fence { tid, scope } => self.fences[cfg.index(tid)].push((index, scope)),
            EventKind::Barrier(_) => {
                for &u in participants {
                    self.barriers[cfg.index(u)].push(index);
                }
            }
            EventKind::End { .. } => {}
        }
    }

    fn on_access(&mut self, loc: Location, cur: Rec) {
        let me = self.who(cur.at.tid);
        let meta = self.locs.entry(loc).or_default();
        let mut found = Vec::new();
        if let Some(w) = &meta.write {
            found.push(w.clone());
        }
        if cur.write {
            found.extend(meta.readers.values().cloned());
        }
        if cur.write {
            meta.write = Some(cur.clone());
            meta.readers.clear();
        } else {
            meta.readers.insert(me, cur.clone());
        }
        for prior in found {
            if self.who(prior.at.tid) != me && self.races(&prior, &cur) {
                let kind = match (prior.write, cur.write) {
                    (true, true) => RaceKind::Ww,
                    (true, false) => RaceKind::Wr,
                    _ => RaceKind::Rw,
                };
                self.sink.push(kind, loc, prior.at, cur.at);
            }
        }
    }

    fn races(&self, prior: &Rec, cur: &Rec) -> bool {
        let (p, c) = (prior.at.tid, cur.at.tid);
        if atomics_cover(prior.atomic, cur.atomic, p, c) || self.barrier_separated(prior, cur) {
            return false;
        }
        if !prior.held.is_empty() || !cur.held.is_empty() {
            let common = prior
                .held
                .iter()
                .any(|(l1, s1)| cur.held.iter().any(|(l2, s2)| l1 == l2 && scope_pair_overlaps(*s1, *s2)));
            return !common;
        }
        let fenced = self.fences[self.cfg.index(p)].iter().any(|&(i, s)| {
            i > prior.at.event
                && i < cur.at.event
                && match s {
                    Scope::Device => true,
                    Scope::Block(b) => b == c.block,
                }
        });
        !fenced
    }

    fn barrier_separated(&self, prior: &Rec, cur: &Rec) -> bool {
        let mine = &self.barriers[self.cfg.index(cur.at.tid)];
        self.barriers[self.cfg.index(prior.at.tid)]
            .iter()
            .any(|b| *b > prior.at.event && mine.binary_search(b).is_ok())
    }
}
