//! Race detectors and the driver that replays a trace through them.

mod gwcp;
mod hb;
mod lockset;

use serde::Serialize;

use crate::report::{DetectorKind, RaceReport};
use crate::trace::{EventKind, ThreadId, Trace};
use crate::vclock::{Clock, CompressedPtvc, CompressionCounts, VectorClock};

pub use gwcp::Gwcp;
pub use hb::Hb;
pub use lockset::Lockset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Options {
    /// Hierarchical compressed clocks with forced compression at barriers;
    /// dense clocks with plain joins otherwise.
    pub compress: bool,
    /// Share acquire queues among threads that never touched a lock.
    pub inactive_opt: bool,
    /// Lockset only: identify threads by warp.
    pub warp_granularity: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { compress: true, inactive_opt: true, warp_granularity: false }
    }
}

/// A vector-clock detector that can be stepped event by event.
pub trait ClockDetector {
    /// `participants` is non-empty only for barriers.
    fn step(&mut self, index: usize, ev: &EventKind, participants: &[ThreadId]);
    fn local_time(&self, tid: ThreadId) -> u64;
    /// The clock an event of `tid` is ordered against (C for GWCP, H for HB).
    fn ordering_clock(&self, tid: ThreadId) -> VectorClock;
    fn reports(&self) -> &[RaceReport];
}

/// Runs one detector over a validated trace.
pub fn detect(trace: &Trace, detector: DetectorKind, opts: &Options) -> Vec<RaceReport> {
    match detector {
        DetectorKind::Gwcp if opts.compress => replay(Gwcp::<CompressedPtvc>::new(trace.config, opts.inactive_opt), trace),
        DetectorKind::Gwcp => replay(Gwcp::<VectorClock>::new(trace.config, opts.inactive_opt), trace),
        DetectorKind::Hb if opts.compress => replay(Hb::<CompressedPtvc>::new(trace.config), trace),
        DetectorKind::Hb => replay(Hb::<VectorClock>::new(trace.config), trace),
        DetectorKind::Lockset => Lockset::new(trace.config, opts.warp_granularity).run(trace),
    }
}

fn replay<D: ClockDetector>(mut d: D, trace: &Trace) -> Vec<RaceReport> {
    let participants = trace.barrier_participants();
    for (i, ev) in trace.events.iter().enumerate() {
        d.step(i, ev, &participants[i]);
    }
    d.reports().to_vec()
}

/// Pairwise order among the non-barrier events of a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderMatrix {
    pub detector: DetectorKind,
    /// Trace indices of the events covered, ascending.
    pub events: Vec<usize>,
    /// `(i, j)` trace-index pairs with `i < j` and event `i` ordered before `j`.
    pub ordered: Vec<(usize, usize)>,
}

impl OrderMatrix {
    pub fn is_ordered(&self, i: usize, j: usize) -> bool {
        self.ordered.binary_search(&(i, j)).is_ok()
    }
}

/// Order relation of the GWCP or HB detector: `e1` precedes `e2` when they
/// belong to one thread or the clock of `e2` covers the local time of `e1`.
pub fn order_matrix(trace: &Trace, detector: DetectorKind, opts: &Options) -> Option<OrderMatrix> {
    let stamps = match detector {
        DetectorKind::Gwcp if opts.compress => stamps(Gwcp::<CompressedPtvc>::new(trace.config, opts.inactive_opt), trace),
        DetectorKind::Gwcp => stamps(Gwcp::<VectorClock>::new(trace.config, opts.inactive_opt), trace),
        DetectorKind::Hb if opts.compress => stamps(Hb::<CompressedPtvc>::new(trace.config), trace),
        DetectorKind::Hb => stamps(Hb::<VectorClock>::new(trace.config), trace),
        DetectorKind::Lockset => return None,
    };
    let cfg = trace.config;
    let mut ordered = Vec::new();
    for (a, (i, ti, time_i, _)) in stamps.iter().enumerate() {
        for (j, tj, _, clock_j) in &stamps[a + 1..] {
            if ti == tj || clock_j.get(cfg.index(*ti)) >= *time_i {
                ordered.push((*i, *j));
            }
        }
    }
    Some(OrderMatrix { detector, events: stamps.iter().map(|s| s.0).collect(), ordered })
}

fn stamps<D: ClockDetector>(mut d: D, trace: &Trace) -> Vec<(usize, ThreadId, u64, VectorClock)> {
    let cfg = trace.config;
    let participants = trace.barrier_participants();
    let mut out = Vec::new();
    for (i, ev) in trace.events.iter().enumerate() {
        let before = ev.tid().map(|t| d.local_time(t));
        d.step(i, ev, &participants[i]);
        if let (Some(t), Some(time)) = (ev.tid(), before) {
            let mut c = d.ordering_clock(t);
            c.set(cfg.index(t), time);
            out.push((i, t, time, c));
        }
    }
    out
}

/// Representation counters of the GWCP per-thread P clocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompressionStats {
    pub events: usize,
    /// Counters summed over all threads after the last event.
    pub last: CompressionCounts,
    pub peak_entries: usize,
    /// Counters after each event, in trace order.
    pub timeline: Vec<CompressionCounts>,
}

pub fn compression_stats(trace: &Trace, opts: &Options) -> CompressionStats {
    let mut d = Gwcp::<CompressedPtvc>::new(trace.config, opts.inactive_opt);
    let participants = trace.barrier_participants();
    let mut timeline = Vec::with_capacity(trace.len());
    for (i, ev) in trace.events.iter().enumerate() {
        d.step(i, ev, &participants[i]);
        timeline.push(d.p_counts());
    }
    let last = timeline.last().copied().unwrap_or_else(|| d.p_counts());
    let peak_entries = timeline.iter().map(|c| c.entries).max().unwrap_or(last.entries);
    CompressionStats { events: trace.len(), last, peak_entries, timeline }
}

/// Shared barrier step for the vector-clock detectors. Every participant
/// gets the joint H clock and a fresh local time `M + 1`, where `M` is the
/// largest participant-column entry of that joint clock. The bump puts the
/// post-barrier epochs above any value forced compression may have written
/// into participant columns.
pub(crate) fn barrier_clocks<C: Clock>(
    cfg: &crate::trace::Config,
    h_clocks: &[&C],
    participants: &[ThreadId],
) -> (C, u64) {
    let hj = C::barrier_join(cfg, h_clocks, participants);
    let m = participants.iter().map(|&u| hj.get(cfg, u)).max().unwrap_or(0);
    (hj, m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    #[test]
    fn single_thread_barrier_only_bumps_local_time() {
        let t = parse_trace("config blocks=1 warps=1 lanes=1\n0.0.0 wr g:0x1\nbar block 0\n0.0.0 wr g:0x1\n").unwrap();
        let m = order_matrix(&t, DetectorKind::Gwcp, &Options::default()).unwrap();
        assert_eq!(m.events, vec![0, 2]);
        assert_eq!(m.ordered, vec![(0, 2)]);
    }
}
