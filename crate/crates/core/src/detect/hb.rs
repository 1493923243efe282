use std::collections::BTreeMap;

use super::{barrier_clocks, ClockDetector};
use crate::report::{Access, AccessRef, AccessTable, DetectorKind, RaceReport, ReportSink, SameInstrCheck};
use crate::sync::hb_release_acquire_applies;
use crate::trace::{Config, EventKind, Scope, ThreadId};
use crate::vclock::{Clock, VectorClock};

/// Scoped happens-before detector: H clocks only, release→acquire edges
/// filtered by scope.
#[derive(Debug)]
pub struct Hb<C> {
    cfg: Config,
    time: Vec<u64>,
    h: Vec<C>,
    /// Released H per (lock, scoped instance).
    locks: BTreeMap<u64, BTreeMap<Scope, C>>,
    table: AccessTable,
    same_instr: SameInstrCheck,
    sink: ReportSink,
}

/// A representative releaser for an instance: block-scoped instances are
/// released only from their own block.
fn releaser(scope: Scope) -> ThreadId {
    match scope {
        Scope::Block(b) => ThreadId::new(b, 0, 0),
        Scope::Device => ThreadId::new(u32::MAX, 0, 0),
    }
}

impl<C: Clock> Hb<C> {
    pub fn new(cfg: Config) -> Self {
        let h = cfg
            .threads()
            .map(|t| {
                let mut c = C::zero(&cfg);
                c.set(&cfg, t, 1);
                c
            })
            .collect();
        Hb {
            cfg,
            time: vec![1; cfg.thread_count()],
            h,
            locks: BTreeMap::new(),
            table: AccessTable::default(),
            same_instr: SameInstrCheck::default(),
            sink: ReportSink::new(DetectorKind::Hb),
        }
    }
}

impl<C: Clock> ClockDetector for Hb<C> {
    fn step(&mut self, index: usize, ev: &EventKind, participants: &[ThreadId]) {
        let cfg = self.cfg;
        if !ev.is_access() {
            self.same_instr.observe(None, &mut self.sink);
        }
        match *ev {
            EventKind::Access { tid, loc, write, atomic, instr } => {
                let ti = cfg.index(tid);
                let acc = Access { at: AccessRef { event: index, tid, instr }, loc, write, atomic, time: self.time[ti] };
                let h = &self.h[ti];
                self.same_instr.observe(Some((&acc.at, loc, write)), &mut self.sink);
                self.table.check_and_update(&acc, |u, time| time <= h.get(&cfg, u), &mut self.sink);
            }
            EventKind::Acquire { tid, lock, scope } => {
                let ti = cfg.index(tid);
                for (s, released) in self.locks.get(&lock).into_iter().flatten() {
                    if hb_release_acquire_applies(*s, scope, releaser(*s), tid) {
                        self.h[ti].join_assign(released);
                    }
                }
            }
            EventKind::Release { tid, lock, scope } => {
                let ti = cfg.index(tid);
                self.locks
                    .entry(lock)
                    .or_default()
                    .entry(scope)
                    .or_insert_with(|| C::zero(&cfg))
                    .join_assign(&self.h[ti]);
                self.time[ti] += 1;
                let time = self.time[ti];
                self.h[ti].set(&cfg, tid, time);
            }
            EventKind::Barrier(_) => {
                let hs: Vec<&C> = participants.iter().map(|&u| &self.h[cfg.index(u)]).collect();
                let (hj, time) = barrier_clocks(&cfg, &hs, participants);
                for &u in participants {
                    let ui = cfg.index(u);
                    self.h[ui] = hj.clone();
                    self.h[ui].set(&cfg, u, time);
                    self.time[ui] = time;
                }
            }
            EventKind::Fence { .. } | EventKind::End { .. } => {}
        }
    }

    fn local_time(&self, tid: ThreadId) -> u64 {
        self.time[self.cfg.index(tid)]
    }

    fn ordering_clock(&self, tid: ThreadId) -> VectorClock {
        self.h[self.cfg.index(tid)].to_dense(&self.cfg)
    }

    fn reports(&self) -> &[RaceReport] {
        &self.sink.reports
    }
}
