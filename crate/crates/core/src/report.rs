//! Race reports and the bookkeeping shared by the detectors.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::sync::atomics_cover;
use crate::trace::{AccessAttr, Location, ThreadId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Gwcp,
    Hb,
    Lockset,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Gwcp => "gwcp",
            DetectorKind::Hb => "hb",
            DetectorKind::Lockset => "lockset",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RaceKind {
    Ww,
    Wr,
    Rw,
}

impl RaceKind {
    fn of(prior_write: bool, current_write: bool) -> RaceKind {
        match (prior_write, current_write) {
            (true, true) => RaceKind::Ww,
            (true, false) => RaceKind::Wr,
            _ => RaceKind::Rw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RaceClass {
    Intrawarp,
    Interwarp,
    Interblock,
}

impl RaceClass {
    pub fn of(a: ThreadId, b: ThreadId) -> RaceClass {
        if a.same_warp(&b) {
            RaceClass::Intrawarp
        } else if a.block == b.block {
            RaceClass::Interwarp
        } else {
            RaceClass::Interblock
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    /// The first race of the run; vector-clock soundness applies.
    First,
    /// Reported after an earlier race; analysis continued as if ordered.
    PostRace,
    /// Produced by the lockset approximation.
    Approximate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AccessRef {
    pub event: usize,
    pub tid: ThreadId,
    pub instr: Option<u64>,
}

impl AccessRef {
    /// Instruction identity used for duplicate suppression.
    fn key(&self) -> u64 {
        self.instr.unwrap_or(self.event as u64 | 1 << 63)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RaceReport {
    pub detector: DetectorKind,
    pub kind: RaceKind,
    pub location: Location,
    pub prior: AccessRef,
    pub current: AccessRef,
    pub class: RaceClass,
    pub confidence: Confidence,
}

/// Collects reports, keeping only the first per (location, instruction pair).
#[derive(Debug)]
pub(crate) struct ReportSink {
    detector: DetectorKind,
    seen: HashSet<(Location, u64, u64)>,
    pub reports: Vec<RaceReport>,
}

impl ReportSink {
    pub fn new(detector: DetectorKind) -> Self {
        ReportSink { detector, seen: HashSet::new(), reports: Vec::new() }
    }

    pub fn push(&mut self, kind: RaceKind, location: Location, prior: AccessRef, current: AccessRef) {
        if !self.seen.insert((location, prior.key(), current.key())) {
            return;
        }
        let confidence = match self.detector {
            DetectorKind::Lockset => Confidence::Approximate,
            _ if self.reports.is_empty() => Confidence::First,
            _ => Confidence::PostRace,
        };
        self.reports.push(RaceReport {
            detector: self.detector,
            kind,
            location,
            prior,
            current,
            class: RaceClass::of(prior.tid, current.tid),
            confidence,
        });
    }
}

/// One recorded access: an epoch plus the attributes the checks need.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AccessInfo {
    pub at: AccessRef,
    pub time: u64,
    pub atomic: AccessAttr,
}

#[derive(Debug, Default)]
struct LocationState {
    write: Option<AccessInfo>,
    readers: BTreeMap<ThreadId, AccessInfo>,
}

/// Last-writer epoch and reader map per location, checked against a
/// thread's clock by the vector-clock detectors.
#[derive(Debug, Default)]
pub(crate) struct AccessTable {
    locs: BTreeMap<Location, LocationState>,
}

pub(crate) struct Access {
    pub at: AccessRef,
    pub loc: Location,
    pub write: bool,
    pub atomic: AccessAttr,
    pub time: u64,
}

impl AccessTable {
    /// Reports every prior access not ordered before `acc` (per `ordered`,
    /// which receives the prior thread and its epoch time), then records it.
    pub fn check_and_update(
        &mut self,
        acc: &Access,
        ordered: impl Fn(ThreadId, u64) -> bool,
        sink: &mut ReportSink,
    ) {
        let t = acc.at.tid;
        let st = self.locs.entry(acc.loc).or_default();
        let racy = |p: &AccessInfo| {
            p.at.tid != t && !ordered(p.at.tid, p.time) && !atomics_cover(p.atomic, acc.atomic, p.at.tid, t)
        };
        if let Some(w) = st.write.filter(racy) {
            sink.push(RaceKind::of(true, acc.write), acc.loc, w.at, acc.at);
        }
        if acc.write {
            for r in st.readers.values().filter(|r| racy(r)) {
                sink.push(RaceKind::Rw, acc.loc, r.at, acc.at);
            }
        }
        let info = AccessInfo { at: acc.at, time: acc.time, atomic: acc.atomic };
        if acc.write {
            st.write = Some(info);
            st.readers.clear();
        } else {
            st.readers.insert(t, info);
        }
    }
}

/// Detects lanes of one coalesced warp record writing the same location.
/// A record is recognised after expansion as a maximal run of consecutive
/// writes from one warp sharing an instruction id.
#[derive(Debug, Default)]
pub(crate) struct SameInstrCheck {
    run: Vec<(AccessRef, Location)>,
}

impl SameInstrCheck {
    pub fn observe(&mut self, acc: Option<(&AccessRef, Location, bool)>, sink: &mut ReportSink) {
        let Some((at, loc, true)) = acc else {
            self.run.clear();
            return;
        };
        let continues = match (self.run.last(), at.instr) {
            (Some((prev, _)), Some(i)) => prev.instr == Some(i) && prev.tid.same_warp(&at.tid),
            _ => false,
        };
        if !continues {
            self.run.clear();
        }
        if at.instr.is_some() {
            if let Some((prev, _)) = self.run.iter().find(|(p, l)| *l == loc && p.tid != at.tid) {
                sink.push(RaceKind::Ww, loc, *prev, *at);
            }
            self.run.push((*at, loc));
        }
    }
}
