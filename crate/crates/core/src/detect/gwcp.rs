use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{barrier_clocks, ClockDetector};
use crate::report::{Access, AccessRef, AccessTable, DetectorKind, RaceReport, ReportSink, SameInstrCheck};
use crate::sync::scope_pair_overlaps;
use crate::trace::{Config, EventKind, Location, Scope, ThreadId};
use crate::vclock::{Clock, CompressionCounts, VectorClock};

#[derive(Debug)]
struct Frame {
    lock: u64,
    scope: Scope,
    section: usize,
    reads: BTreeSet<Location>,
    writes: BTreeSet<Location>,
}

#[derive(Debug)]
struct ThreadState<C> {
    time: u64,
    h: C,
    p: C,
    frames: Vec<Frame>,
    exited: bool,
}

/// One critical section as seen by the other threads' queues: the
/// acquirer's C at the acquire and, once released, its H at the release.
/// Pairing the two halves by identity rather than by queue position keeps
/// them matched when non-overlapping sections of one lock release out of
/// acquire order.
#[derive(Debug)]
struct Section<C> {
    acquire: C,
    scope: Scope,
    release: Option<C>,
}

#[derive(Debug)]
enum Slot {
    /// Never acquired or released this lock; reads the shared queue.
    Shared,
    Own(VecDeque<usize>),
    Exited,
}

#[derive(Debug)]
struct LockState<C> {
    /// (H, P) per scoped instance.
    instances: BTreeMap<Scope, (C, C)>,
    sections: Vec<Section<C>>,
    slots: Vec<Slot>,
    shared: VecDeque<usize>,
    lr: HashMap<Location, BTreeMap<Scope, C>>,
    lw: HashMap<Location, BTreeMap<Scope, C>>,
}

/// Online GWCP tracker over clocks of type `C`.
#[derive(Debug)]
pub struct Gwcp<C> {
    cfg: Config,
    inactive_opt: bool,
    threads: Vec<ThreadState<C>>,
    locks: BTreeMap<u64, LockState<C>>,
    table: AccessTable,
    same_instr: SameInstrCheck,
    sink: ReportSink,
}

impl<C: Clock> Gwcp<C> {
    pub fn new(cfg: Config, inactive_opt: bool) -> Self {
        let threads = cfg
            .threads()
            .map(|t| {
                let mut h = C::zero(&cfg);
                h.set(&cfg, t, 1);
                ThreadState { time: 1, h, p: C::zero(&cfg), frames: Vec::new(), exited: false }
            })
            .collect();
        Gwcp {
            cfg,
            inactive_opt,
            threads,
            locks: BTreeMap::new(),
            table: AccessTable::default(),
            same_instr: SameInstrCheck::default(),
            sink: ReportSink::new(DetectorKind::Gwcp),
        }
    }

    /// P with the thread's own entry replaced by its local time.
    fn c_clock(cfg: &Config, st: &ThreadState<C>, t: ThreadId) -> C {
        let mut c = st.p.clone();
        c.set(cfg, t, st.time);
        c
    }

    pub(crate) fn p_counts(&self) -> CompressionCounts {
        let mut total = CompressionCounts::default();
        for st in &self.threads {
            if let Some(c) = st.p.compression() {
                total += c;
            }
        }
        total
    }

    fn lock_state(&mut self, lock: u64) -> &mut LockState<C> {
        let (opt, threads) = (self.inactive_opt, &self.threads);
        self.locks.entry(lock).or_insert_with(|| LockState {
            instances: BTreeMap::new(),
            sections: Vec::new(),
            slots: threads
                .iter()
                .map(|st| match (st.exited, opt) {
                    (true, _) => Slot::Exited,
                    (false, true) => Slot::Shared,
                    (false, false) => Slot::Own(VecDeque::new()),
                })
                .collect(),
            shared: VecDeque::new(),
            lr: HashMap::new(),
            lw: HashMap::new(),
        })
    }

    /// Rule (ii): releases of earlier sections whose acquire is already
    /// ordered before `t` are ordered before `t`'s current lock event,
    /// provided the two sections' scopes overlap.
    fn drain(&mut self, t: ThreadId, lock: u64, scope: Scope) {
        let cfg = self.cfg;
        let ti = cfg.index(t);
        let ls = self.lock_state(lock);
        if let Slot::Shared = ls.slots[ti] {
            ls.slots[ti] = Slot::Own(ls.shared.clone());
        }
        let ls = self.locks.get_mut(&lock).expect("lock state just created");
        let Slot::Own(queue) = &mut ls.slots[ti] else { return };
        let st = &mut self.threads[ti];
        while let Some(&s) = queue.front() {
            let sec = &ls.sections[s];
            let Some(rel) = &sec.release else { break };
            if !sec.acquire.leq(&Self::c_clock(&cfg, st, t)) {
                break;
            }
            queue.pop_front();
            if scope_pair_overlaps(sec.scope, scope) {
                st.p.join_assign(rel);
            }
        }
    }

    fn on_acquire(&mut self, t: ThreadId, lock: u64, scope: Scope) {
        self.drain(t, lock, scope);
        let cfg = self.cfg;
        let ti = cfg.index(t);
        let ls = self.locks.get_mut(&lock).expect("drain creates the lock state");
        let st = &mut self.threads[ti];
        for (s, (h, p)) in &ls.instances {
            if scope_pair_overlaps(*s, scope) {
                st.h.join_assign(h);
                st.p.join_assign(p);
            }
        }
        let section = ls.sections.len();
        ls.sections.push(Section { acquire: Self::c_clock(&cfg, st, t), scope, release: None });
        for (u, slot) in ls.slots.iter_mut().enumerate() {
            if let Slot::Own(q) = slot {
                if u != ti {
                    q.push_back(section);
                }
            }
        }
        if self.inactive_opt {
            ls.shared.push_back(section);
        }
        st.frames.push(Frame { lock, scope, section, reads: BTreeSet::new(), writes: BTreeSet::new() });
    }

    fn on_release(&mut self, t: ThreadId, lock: u64) {
        let ti = self.cfg.index(t);
        let Some(pos) = self.threads[ti].frames.iter().rposition(|f| f.lock == lock) else { return };
        let scope = self.threads[ti].frames[pos].scope;
        self.drain(t, lock, scope);
        let cfg = self.cfg;
        let frame = self.threads[ti].frames.remove(pos);
        let ls = self.locks.get_mut(&lock).expect("held lock has state");
        let st = &mut self.threads[ti];
        for (sets, staged) in [(&frame.reads, &mut ls.lr), (&frame.writes, &mut ls.lw)] {
            for x in sets {
                staged.entry(*x).or_default().entry(scope).or_insert_with(|| C::zero(&cfg)).join_assign(&st.h);
            }
        }
        let (h, p) = ls.instances.entry(scope).or_insert_with(|| (C::zero(&cfg), C::zero(&cfg)));
        h.join_assign(&st.h);
        p.join_assign(&st.p);
        ls.sections[frame.section].release = Some(st.h.clone());
        st.time += 1;
        st.h.set(&cfg, t, st.time);
    }

    fn on_access(&mut self, acc: Access) {
        let cfg = self.cfg;
        let t = acc.at.tid;
        let ThreadState { p, frames, .. } = &mut self.threads[cfg.index(t)];
        // rule (i): conflicting accesses inside earlier overlapping sections
        for f in frames.iter() {
            let ls = &self.locks[&f.lock];
            let mut staged = vec![&ls.lw];
            if acc.write {
                staged.push(&ls.lr);
            }
            for map in staged {
                for (s, clock) in map.get(&acc.loc).into_iter().flatten() {
                    if scope_pair_overlaps(*s, f.scope) {
                        p.join_assign(clock);
                    }
                }
            }
        }
        let p = &*p;
        self.same_instr.observe(Some((&acc.at, acc.loc, acc.write)), &mut self.sink);
        self.table.check_and_update(&acc, |u, time| time <= p.get(&cfg, u), &mut self.sink);
        for f in frames.iter_mut() {
            if acc.write {
                f.writes.insert(acc.loc);
            } else {
                f.reads.insert(acc.loc);
            }
        }
    }

    fn on_barrier(&mut self, participants: &[ThreadId]) {
        let cfg = self.cfg;
        let hs: Vec<&C> = participants.iter().map(|&u| &self.threads[cfg.index(u)].h).collect();
        let (hj, time) = barrier_clocks(&cfg, &hs, participants);
        let cs: Vec<C> = participants
            .iter()
            .map(|&u| Self::c_clock(&cfg, &self.threads[cfg.index(u)], u))
            .collect();
        let cs: Vec<&C> = cs.iter().collect();
        let pj = C::barrier_join(&cfg, &cs, participants);
        for &u in participants {
            let st = &mut self.threads[cfg.index(u)];
            st.h = hj.clone();
            st.h.set(&cfg, u, time);
            st.time = time;
            st.p = pj.clone();
        }
    }

    fn on_exit(&mut self, t: ThreadId) {
        let ti = self.cfg.index(t);
        self.threads[ti].exited = true;
        for ls in self.locks.values_mut() {
            ls.slots[ti] = Slot::Exited;
        }
    }
}

impl<C: Clock> ClockDetector for Gwcp<C> {
    fn step(&mut self, index: usize, ev: &EventKind, participants: &[ThreadId]) {
        if !ev.is_access() {
            self.same_instr.observe(None, &mut self.sink);
        }
        match *ev {
            EventKind::Access { tid, loc, write, atomic, instr } => {
                let time = self.threads[self.cfg.index(tid)].time;
                let at = AccessRef { event: index, tid, instr };
                self.on_access(Access { at, loc, write, atomic, time });
            }
            EventKind::Acquire { tid, lock, scope } => self.on_acquire(tid, lock, scope),
            EventKind::Release { tid, lock, .. } => self.on_release(tid, lock),
            EventKind::Barrier(_) => self.on_barrier(participants),
            EventKind::Fence { .. } => {}
            EventKind::End { tid } => self.on_exit(tid),
        }
    }

    fn local_time(&self, tid: ThreadId) -> u64 {
        self.threads[self.cfg.index(tid)].time
    }

    fn ordering_clock(&self, tid: ThreadId) -> VectorClock {
        let st = &self.threads[self.cfg.index(tid)];
        Self::c_clock(&self.cfg, st, tid).to_dense(&self.cfg)
    }

    fn reports(&self) -> &[RaceReport] {
        &self.sink.reports
    }
}
