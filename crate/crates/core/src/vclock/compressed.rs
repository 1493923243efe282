use std::collections::BTreeMap;

use serde::Serialize;

use super::{Clock, VClockError, VectorClock};
use crate::trace::{Config, ThreadId};

/// Per-warp clock. An expanded warp stores only nonzero lanes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WarpVc {
    Compressed(u64),
    Expanded(BTreeMap<u32, u64>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockVc {
    Compressed(u64),
    Expanded(Vec<WarpVc>),
}

/// Representation counters of one or more compressed clocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CompressionCounts {
    pub blocks_compressed: usize,
    pub blocks_expanded: usize,
    pub warps_compressed: usize,
    pub warps_expanded: usize,
    /// Integers actually stored.
    pub entries: usize,
}

impl std::ops::AddAssign for CompressionCounts {
    fn add_assign(&mut self, o: Self) {
        self.blocks_compressed += o.blocks_compressed;
        self.blocks_expanded += o.blocks_expanded;
        self.warps_compressed += o.warps_compressed;
        self.warps_expanded += o.warps_expanded;
        self.entries += o.entries;
    }
}

/// Per-thread vector clock stored along the block → warp → lane hierarchy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedPtvc {
    warps: u32,
    lanes: u32,
    blocks: Vec<BlockVc>,
}

impl CompressedPtvc {
    pub fn new(cfg: &Config) -> Self {
        CompressedPtvc {
            warps: cfg.warps,
            lanes: cfg.lanes,
            blocks: vec![BlockVc::Compressed(0); cfg.blocks as usize],
        }
    }

    pub fn from_dense(cfg: &Config, dense: &VectorClock) -> Self {
        let mut p = CompressedPtvc::new(cfg);
        for (i, &t) in dense.as_slice().iter().enumerate() {
            p.set_unchecked(cfg.thread(i), t);
        }
        p.recompress();
        p
    }

    pub fn blocks(&self) -> &[BlockVc] {
        &self.blocks
    }

    fn contains(&self, tid: ThreadId) -> bool {
        (tid.block as usize) < self.blocks.len() && tid.warp < self.warps && tid.lane < self.lanes
    }

    pub fn get(&self, tid: ThreadId) -> Result<u64, VClockError> {
        if !self.contains(tid) {
            return Err(VClockError::OutOfRange(tid));
        }
        Ok(self.get_unchecked(tid))
    }

    fn get_unchecked(&self, tid: ThreadId) -> u64 {
        match &self.blocks[tid.block as usize] {
            BlockVc::Compressed(t) => *t,
            BlockVc::Expanded(ws) => match &ws[tid.warp as usize] {
                WarpVc::Compressed(t) => *t,
                WarpVc::Expanded(m) => m.get(&tid.lane).copied().unwrap_or(0),
            },
        }
    }

    /// Sets one entry, expanding only the path to the touched lane.
    pub fn set(&mut self, tid: ThreadId, t: u64) -> Result<(), VClockError> {
        if !self.contains(tid) {
            return Err(VClockError::OutOfRange(tid));
        }
        self.set_unchecked(tid, t);
        Ok(())
    }

    fn set_unchecked(&mut self, tid: ThreadId, t: u64) {
        if self.get_unchecked(tid) == t {
            return;
        }
        let (warps, lanes) = (self.warps, self.lanes);
        let block = &mut self.blocks[tid.block as usize];
        if let BlockVc::Compressed(v) = *block {
            *block = BlockVc::Expanded(vec![WarpVc::Compressed(v); warps as usize]);
        }
        let BlockVc::Expanded(ws) = block else { unreachable!() };
        let warp = &mut ws[tid.warp as usize];
        if let WarpVc::Compressed(v) = *warp {
            let map = if v == 0 { BTreeMap::new() } else { (0..lanes).map(|l| (l, v)).collect() };
            *warp = WarpVc::Expanded(map);
        }
        let WarpVc::Expanded(m) = warp else { unreachable!() };
        if t == 0 {
            m.remove(&tid.lane);
        } else {
            m.insert(tid.lane, t);
        }
    }

    /// Pointwise maximum followed by re-compression of every warp and block.
    pub fn join(&self, other: &CompressedPtvc) -> Result<CompressedPtvc, VClockError> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.join_in_place(other);
        Ok(out)
    }

    fn join_in_place(&mut self, other: &CompressedPtvc) {
        let (warps, lanes) = (self.warps, self.lanes);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            let joined = match (&*a, b) {
                (BlockVc::Compressed(x), BlockVc::Compressed(y)) => BlockVc::Compressed(*x.max(y)),
                _ => {
                    let wa = warps_of(a, warps);
                    let wb = warps_of(b, warps);
                    let ws = wa.iter().zip(wb.iter()).map(|(x, y)| join_warp(x, y, lanes)).collect();
                    compress_block(ws)
                }
            };
            *a = joined;
        }
    }

    pub fn leq(&self, other: &CompressedPtvc) -> Result<bool, VClockError> {
        self.check_shape(other)?;
        Ok(self.leq_unchecked(other))
    }

    fn leq_unchecked(&self, other: &CompressedPtvc) -> bool {
        self.blocks.iter().zip(&other.blocks).all(|(a, b)| match (a, b) {
            (BlockVc::Compressed(x), BlockVc::Compressed(y)) => x <= y,
            _ => {
                let wa = warps_of(a, self.warps);
                let wb = warps_of(b, self.warps);
                wa.iter().zip(wb.iter()).all(|(x, y)| match (x, y) {
                    (WarpVc::Compressed(x), WarpVc::Compressed(y)) => x <= y,
                    _ => (0..self.lanes).all(|l| lane_of(x, l) <= lane_of(y, l)),
                })
            }
        })
    }

    /// Re-compresses every warp whose lanes agree and every block whose
    /// warps are compressed to one value.
    pub fn recompress(&mut self) {
        let lanes = self.lanes;
        for b in &mut self.blocks {
            if let BlockVc::Expanded(ws) = b {
                let ws: Vec<WarpVc> = ws.drain(..).map(|w| compress_warp(w, lanes)).collect();
                *b = compress_block(ws);
            }
        }
    }

    pub fn to_dense(&self, cfg: &Config) -> VectorClock {
        VectorClock::from_vec(cfg.threads().map(|t| self.get_unchecked(t)).collect())
    }

    pub fn counts(&self) -> CompressionCounts {
        let mut c = CompressionCounts::default();
        for b in &self.blocks {
            match b {
                BlockVc::Compressed(_) => {
                    c.blocks_compressed += 1;
                    c.entries += 1;
                }
                BlockVc::Expanded(ws) => {
                    c.blocks_expanded += 1;
                    for w in ws {
                        match w {
                            WarpVc::Compressed(_) => {
                                c.warps_compressed += 1;
                                c.entries += 1;
                            }
                            WarpVc::Expanded(m) => {
                                c.warps_expanded += 1;
                                c.entries += m.len();
                            }
                        }
                    }
                }
            }
        }
        c
    }

    fn check_shape(&self, other: &CompressedPtvc) -> Result<(), VClockError> {
        let width = |p: &CompressedPtvc| p.blocks.len() * p.warps as usize * p.lanes as usize;
        if (self.blocks.len(), self.warps, self.lanes) == (other.blocks.len(), other.warps, other.lanes) {
            Ok(())
        } else {
            Err(VClockError::WidthMismatch(width(self), width(other)))
        }
    }
}

fn warps_of(b: &BlockVc, warps: u32) -> std::borrow::Cow<'_, [WarpVc]> {
    match b {
        BlockVc::Compressed(v) => std::borrow::Cow::Owned(vec![WarpVc::Compressed(*v); warps as usize]),
        BlockVc::Expanded(ws) => std::borrow::Cow::Borrowed(ws),
    }
}

fn lane_of(w: &WarpVc, lane: u32) -> u64 {
    match w {
        WarpVc::Compressed(v) => *v,
        WarpVc::Expanded(m) => m.get(&lane).copied().unwrap_or(0),
    }
}

fn join_warp(a: &WarpVc, b: &WarpVc, lanes: u32) -> WarpVc {
    match (a, b) {
        (WarpVc::Compressed(x), WarpVc::Compressed(y)) => WarpVc::Compressed(*x.max(y)),
        _ => {
            let m = (0..lanes)
                .map(|l| (l, lane_of(a, l).max(lane_of(b, l))))
                .filter(|&(_, t)| t != 0)
                .collect();
            compress_warp(WarpVc::Expanded(m), lanes)
        }
    }
}

fn compress_warp(w: WarpVc, lanes: u32) -> WarpVc {
    match w {
        WarpVc::Expanded(m) if m.is_empty() => WarpVc::Compressed(0),
        WarpVc::Expanded(m) => {
            let first = *m.values().next().unwrap();
            if m.len() == lanes as usize && m.values().all(|&t| t == first) {
                WarpVc::Compressed(first)
            } else {
                WarpVc::Expanded(m)
            }
        }
        w => w,
    }
}

fn compress_block(ws: Vec<WarpVc>) -> BlockVc {
    match ws.first() {
        Some(WarpVc::Compressed(v)) if ws.iter().all(|w| *w == WarpVc::Compressed(*v)) => {
            BlockVc::Compressed(*v)
        }
        _ => BlockVc::Expanded(ws),
    }
}

/// Joint clock after a barrier. Starts from the plain join of the
/// participants' clocks, then raises every participant column to the
/// largest participant-column value `m*`, so that participants become
/// indistinguishable and their warps/blocks compress. Every participant
/// receives the same clock; the returned vector has one entry per input.
pub fn forced_barrier_join(
    clocks: &[(ThreadId, &CompressedPtvc)],
    participants: &[ThreadId],
) -> Result<Vec<CompressedPtvc>, VClockError> {
    if participants.is_empty() || clocks.is_empty() {
        return Err(VClockError::NoParticipants);
    }
    if let Some((t, _)) = clocks.iter().find(|(t, _)| !participants.contains(t)) {
        return Err(VClockError::NotParticipant(*t));
    }
    let first = clocks[0].1;
    for &u in participants {
        if !first.contains(u) {
            return Err(VClockError::OutOfRange(u));
        }
    }
    let mut joined = first.clone();
    for (_, c) in &clocks[1..] {
        joined.check_shape(c)?;
        joined.join_in_place(c);
    }
    force_columns(&mut joined, participants);
    Ok(vec![joined; clocks.len()])
}

fn force_columns(p: &mut CompressedPtvc, participants: &[ThreadId]) {
    let m = participants.iter().map(|&u| p.get_unchecked(u)).max().unwrap_or(0);
    for &u in participants {
        p.set_unchecked(u, m);
    }
    p.recompress();
}

impl Clock for CompressedPtvc {
    fn zero(cfg: &Config) -> Self {
        CompressedPtvc::new(cfg)
    }

    fn get(&self, _cfg: &Config, tid: ThreadId) -> u64 {
        self.get_unchecked(tid)
    }

    fn set(&mut self, _cfg: &Config, tid: ThreadId, t: u64) {
        self.set_unchecked(tid, t)
    }

    fn join_assign(&mut self, other: &Self) {
        self.join_in_place(other)
    }

    fn leq(&self, other: &Self) -> bool {
        self.leq_unchecked(other)
    }

    fn barrier_join(cfg: &Config, clocks: &[&Self], participants: &[ThreadId]) -> Self {
        let mut joined = CompressedPtvc::new(cfg);
        for c in clocks {
            joined.join_in_place(c);
        }
        force_columns(&mut joined, participants);
        joined
    }

    fn to_dense(&self, cfg: &Config) -> VectorClock {
        CompressedPtvc::to_dense(self, cfg)
    }

    fn compression(&self) -> Option<CompressionCounts> {
        Some(self.counts())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const CFG: Config = Config::new(2, 2, 4);

    fn tid(b: u32, w: u32, l: u32) -> ThreadId {
        ThreadId::new(b, w, l)
    }

    #[test]
    fn set_on_compressed_block_expands_only_touched_warp() {
        let mut p = CompressedPtvc::new(&CFG);
        p.set(tid(1, 1, 2), 9).unwrap();
        assert_eq!(p.blocks()[0], BlockVc::Compressed(0));
        let BlockVc::Expanded(ws) = &p.blocks()[1] else { panic!("block 1 should expand") };
        assert_eq!(ws[0], WarpVc::Compressed(0));
        assert!(matches!(ws[1], WarpVc::Expanded(_)));
        assert_eq!(p.get(tid(1, 1, 2)).unwrap(), 9);
        assert_eq!(p.get(tid(1, 1, 3)).unwrap(), 0);
        assert!(p.get(tid(2, 0, 0)).is_err());
    }

    #[test]
    fn set_to_current_value_keeps_representation() {
        let mut p = CompressedPtvc::new(&CFG);
        p.set(tid(0, 0, 0), 0).unwrap();
        assert_eq!(p.counts().blocks_expanded, 0);
    }

    #[test]
    fn join_of_compressed_blocks_stays_compressed() {
        let mut a = CompressedPtvc::new(&CFG);
        a.blocks[0] = BlockVc::Compressed(5);
        let b = a.clone();
        assert_eq!(a.join(&b).unwrap().blocks()[0], BlockVc::Compressed(5));
    }

    #[test]
    fn join_recompresses_uniform_warp() {
        let mut a = CompressedPtvc::new(&CFG);
        let mut b = CompressedPtvc::new(&CFG);
        for l in 0..4 {
            let target = if l % 2 == 0 { &mut a } else { &mut b };
            target.set(tid(0, 1, l), 7).unwrap();
        }
        a.set(tid(0, 0, 0), 1).unwrap();
        let j = a.join(&b).unwrap();
        let BlockVc::Expanded(ws) = &j.blocks()[0] else { panic!("block 0 should stay expanded") };
        assert_eq!(ws[1], WarpVc::Compressed(7));
    }

    #[test]
    fn join_recompresses_whole_block() {
        let mut a = CompressedPtvc::new(&CFG);
        for t in CFG.block_threads(1) {
            a.set(t, 4).unwrap();
        }
        assert_eq!(a.counts().blocks_expanded, 1);
        let j = a.join(&CompressedPtvc::new(&CFG)).unwrap();
        assert_eq!(j.blocks()[1], BlockVc::Compressed(4));
    }

    #[test]
    fn forced_join_examples() {
        let (t0, t1) = (tid(0, 0, 0), tid(0, 0, 1));
        let mut a = CompressedPtvc::new(&CFG);
        let mut b = CompressedPtvc::new(&CFG);
        a.set(t1, 3).unwrap();
        b.set(t0, 5).unwrap();
        let out = forced_barrier_join(&[(t0, &a), (t1, &b)], &[t0, t1]).unwrap();
        for c in &out {
            assert_eq!(c.get(t0).unwrap(), 5);
            assert_eq!(c.get(t1).unwrap(), 5);
        }

        let single = forced_barrier_join(&[(t0, &b)], &[t0]).unwrap();
        assert_eq!(single[0], b);

        assert_eq!(forced_barrier_join(&[], &[]), Err(VClockError::NoParticipants));
        assert_eq!(forced_barrier_join(&[(t0, &a)], &[t1]), Err(VClockError::NotParticipant(t0)));
    }

    #[test]
    fn whole_block_barrier_compresses_block() {
        let members: Vec<ThreadId> = CFG.block_threads(0).collect();
        let clocks: Vec<CompressedPtvc> = members
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut p = CompressedPtvc::new(&CFG);
                p.set(t, i as u64 + 1).unwrap();
                p.set(tid(1, 0, 1), 2).unwrap();
                p
            })
            .collect();
        let pairs: Vec<(ThreadId, &CompressedPtvc)> = members.iter().copied().zip(clocks.iter()).collect();
        for c in forced_barrier_join(&pairs, &members).unwrap() {
            assert_eq!(c.blocks()[0], BlockVc::Compressed(8));
            assert_eq!(c.get(tid(1, 0, 1)).unwrap(), 2);
        }
    }

    fn op() -> impl Strategy<Value = (u8, usize, u64, usize)> {
        (0u8..3, 0usize..16, 0u64..6, 0usize..4)
    }

    proptest! {
        #[test]
        fn matches_dense_reference(ops in proptest::collection::vec(op(), 1..60)) {
            let n = CFG.thread_count();
            let mut comp = vec![CompressedPtvc::new(&CFG); 4];
            let mut dense = vec![VectorClock::zero(n); 4];
            for (kind, idx, t, other) in ops {
                let slot = idx % 4;
                match kind {
                    0 => {
                        comp[slot].set(CFG.thread(idx), t).unwrap();
                        dense[slot].set(idx, t);
                    }
                    1 => {
                        comp[slot] = comp[slot].join(&comp[other]).unwrap();
                        dense[slot] = dense[slot].join(&dense[other]).unwrap();
                    }
                    _ => {
                        prop_assert_eq!(comp[slot].leq(&comp[other]).unwrap(), dense[slot].leq(&dense[other]).unwrap());
                    }
                }
                prop_assert_eq!(comp[slot].to_dense(&CFG), dense[slot].clone());
            }
        }

        #[test]
        fn join_is_a_semilattice(a in proptest::collection::vec(0u64..4, 16), b in proptest::collection::vec(0u64..4, 16), c in proptest::collection::vec(0u64..4, 16)) {
            let [a, b, c] = [a, b, c].map(|v| CompressedPtvc::from_dense(&CFG, &VectorClock::from_vec(v)));
            let d = |p: CompressedPtvc| p.to_dense(&CFG);
            prop_assert_eq!(d(a.join(&b).unwrap()), d(b.join(&a).unwrap()));
            prop_assert_eq!(d(a.join(&b).unwrap().join(&c).unwrap()), d(a.join(&b.join(&c).unwrap()).unwrap()));
            prop_assert_eq!(d(a.join(&a).unwrap()), d(a.clone()));
        }
    }
}
