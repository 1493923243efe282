//! Kernel event model and the line-oriented trace format.
//!
//! A [`Trace`] is a totally ordered sequence of events from one kernel
//! launch. Thread identities are flattened to `(block, warp, lane)`;
//! shared-memory locations carry the owning block so that shared memory of
//! different blocks never aliases.

mod infer;
mod parse;
mod validate;
mod write;

use std::fmt;

use serde::Serialize;

pub use infer::{infer_locks, Inferred};
pub use parse::{parse_trace, ParseError};
pub use validate::{validate_trace, Diagnostic, DiagnosticKind};
pub use write::write_trace;

/// Default number of lanes per warp.
pub const DEFAULT_WARP_SIZE: u32 = 32;

/// Largest supported warp; masks are 64-bit.
pub const MAX_WARP_SIZE: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadId {
    pub block: u32,
    pub warp: u32,
    pub lane: u32,
}

impl ThreadId {
    pub const fn new(block: u32, warp: u32, lane: u32) -> Self {
        ThreadId { block, warp, lane }
    }

    pub fn same_warp(&self, other: &ThreadId) -> bool {
        self.block == other.block && self.warp == other.warp
    }
}

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.block, self.warp, self.lane)
    }
}

impl Serialize for ThreadId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Launch geometry: `blocks` blocks of `warps` warps of `lanes` threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub blocks: u32,
    pub warps: u32,
    pub lanes: u32,
}

impl Config {
    pub const fn new(blocks: u32, warps: u32, lanes: u32) -> Self {
        Config { blocks, warps, lanes }
    }

    pub fn threads_per_block(&self) -> usize {
        self.warps as usize * self.lanes as usize
    }

    pub fn thread_count(&self) -> usize {
        self.blocks as usize * self.threads_per_block()
    }

    pub fn contains(&self, tid: ThreadId) -> bool {
        tid.block < self.blocks && tid.warp < self.warps && tid.lane < self.lanes
    }

    /// Dense global index: `((block * warps) + warp) * lanes + lane`.
    pub fn index(&self, tid: ThreadId) -> usize {
        debug_assert!(self.contains(tid), "{tid} outside {self:?}");
        ((tid.block as usize * self.warps as usize) + tid.warp as usize) * self.lanes as usize
            + tid.lane as usize
    }

    pub fn thread(&self, index: usize) -> ThreadId {
        let lanes = self.lanes as usize;
        let warps = self.warps as usize;
        ThreadId {
            lane: (index % lanes) as u32,
            warp: ((index / lanes) % warps) as u32,
            block: (index / (lanes * warps)) as u32,
        }
    }

    pub fn threads(&self) -> impl Iterator<Item = ThreadId> + '_ {
        (0..self.thread_count()).map(move |i| self.thread(i))
    }

    pub fn block_threads(&self, block: u32) -> impl Iterator<Item = ThreadId> + '_ {
        (0..self.warps).flat_map(move |w| (0..self.lanes).map(move |l| ThreadId::new(block, w, l)))
    }

    pub fn full_mask(&self) -> u64 {
        if self.lanes >= 64 {
            u64::MAX
        } else {
            (1u64 << self.lanes) - 1
        }
    }
}

/// Visibility of a synchronization operation. SYSTEM is folded into
/// `Device` at parse time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    /// Block scope; carries the block of the issuing thread.
    Block(u32),
    Device,
}

impl Scope {
    pub fn is_device(&self) -> bool {
        matches!(self, Scope::Device)
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Scope::Block(_) => "block",
            Scope::Device => "device",
        }
    }

    /// The narrower of two scopes issued by the same thread.
    pub fn narrowest(self, other: Scope) -> Scope {
        match (self, other) {
            (Scope::Device, Scope::Device) => Scope::Device,
            (Scope::Block(b), _) | (_, Scope::Block(b)) => Scope::Block(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Global(u64),
    /// Shared memory is private to a block.
    Shared { block: u32, addr: u64 },
}

impl Location {
    pub fn addr(&self) -> u64 {
        match *self {
            Location::Global(a) | Location::Shared { addr: a, .. } => a,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Global(a) => write!(f, "g:{a:#x}"),
            Location::Shared { addr, .. } => write!(f, "s:{addr:#x}"),
        }
    }
}

impl Serialize for Location {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        match *self {
            Location::Global(addr) => {
                let mut st = s.serialize_struct("Location", 2)?;
                st.serialize_field("space", "global")?;
                st.serialize_field("addr", &format!("{addr:#x}"))?;
                st.end()
            }
            Location::Shared { block, addr } => {
                let mut st = s.serialize_struct("Location", 3)?;
                st.serialize_field("space", "shared")?;
                st.serialize_field("block", &block)?;
                st.serialize_field("addr", &format!("{addr:#x}"))?;
                st.end()
            }
        }
    }
}

/// Atomicity of a memory access: `Some(scope)` for a scoped atomic.
pub type AccessAttr = Option<Scope>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BarrierKind {
    /// `__syncthreads()` for one block. `arrived` optionally records the
    /// per-warp arrival masks; absent means "every live thread".
    Block { block: u32, arrived: Option<Vec<u64>> },
    /// `__syncwarp(mask)`.
    Warp { block: u32, warp: u32, mask: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Access {
        tid: ThreadId,
        loc: Location,
        write: bool,
        atomic: AccessAttr,
        instr: Option<u64>,
    },
    Acquire { tid: ThreadId, lock: u64, scope: Scope },
    Release { tid: ThreadId, lock: u64, scope: Scope },
    Barrier(BarrierKind),
    Fence { tid: ThreadId, scope: Scope },
    End { tid: ThreadId },
}

impl EventKind {
    /// Issuing thread; barriers are joint events and have none.
    pub fn tid(&self) -> Option<ThreadId> {
        match *self {
            EventKind::Access { tid, .. }
            | EventKind::Acquire { tid, .. }
            | EventKind::Release { tid, .. }
            | EventKind::Fence { tid, .. }
            | EventKind::End { tid } => Some(tid),
            EventKind::Barrier(_) => None,
        }
    }

    pub fn is_access(&self) -> bool {
        matches!(self, EventKind::Access { .. })
    }

    pub fn is_lock_op(&self) -> bool {
        matches!(self, EventKind::Acquire { .. } | EventKind::Release { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub config: Config,
    pub events: Vec<EventKind>,
}

impl Trace {
    pub fn new(config: Config) -> Self {
        Trace { config, events: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, ev: EventKind) -> &mut Self {
        self.events.push(ev);
        self
    }

    pub fn has_lock_ops(&self) -> bool {
        self.events.iter().any(EventKind::is_lock_op)
    }

    /// Participants of every barrier, resolved against thread exits in
    /// trace order. Entry `i` is empty for non-barrier events.
    pub fn barrier_participants(&self) -> Vec<Vec<ThreadId>> {
        let cfg = self.config;
        let mut ended = vec![false; cfg.thread_count()];
        let mut out = Vec::with_capacity(self.events.len());
        for ev in &self.events {
            match ev {
                EventKind::Barrier(kind) => out.push(barrier_members(&cfg, kind, &ended)),
                EventKind::End { tid } => {
                    if cfg.contains(*tid) {
                        ended[cfg.index(*tid)] = true;
                    }
                    out.push(Vec::new());
                }
                _ => out.push(Vec::new()),
            }
        }
        out
    }
}

/// Threads taking part in a barrier given the current exit state.
pub(crate) fn barrier_members(cfg: &Config, kind: &BarrierKind, ended: &[bool]) -> Vec<ThreadId> {
    match kind {
        BarrierKind::Block { block, arrived } => cfg
            .block_threads(*block)
            .filter(|t| match arrived {
                Some(masks) => masks
                    .get(t.warp as usize)
                    .is_some_and(|m| m >> t.lane & 1 == 1),
                None => !ended[cfg.index(*t)],
            })
            .collect(),
        BarrierKind::Warp { block, warp, mask } => (0..cfg.lanes)
            .filter(|l| mask >> l & 1 == 1)
            .map(|l| ThreadId::new(*block, *warp, l))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_index_round_trips() {
        let cfg = Config::new(3, 2, 4);
        for i in 0..cfg.thread_count() {
            assert_eq!(cfg.index(cfg.thread(i)), i);
        }
        assert_eq!(cfg.index(ThreadId::new(1, 1, 2)), ((2 + 1) * 4) + 2);
    }

    #[test]
    fn narrowest_scope() {
        assert_eq!(Scope::Device.narrowest(Scope::Block(2)), Scope::Block(2));
        assert_eq!(Scope::Block(1).narrowest(Scope::Device), Scope::Block(1));
        assert_eq!(Scope::Device.narrowest(Scope::Device), Scope::Device);
    }

    #[test]
    fn shared_locations_of_different_blocks_differ() {
        let a = Location::Shared { block: 0, addr: 4 };
        let b = Location::Shared { block: 1, addr: 4 };
        assert_ne!(a, b);
        assert_ne!(Location::Global(4), a);
    }
}
