//! Logical clocks: dense vector clocks, epochs, and the block/warp
//! hierarchical compressed per-thread clock.

mod compressed;

use std::fmt;

use thiserror::Error;

use crate::trace::{Config, ThreadId};

pub use compressed::{forced_barrier_join, BlockVc, CompressedPtvc, CompressionCounts, WarpVc};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VClockError {
    #[error("clock width mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("thread {0} outside the clock's configuration")]
    OutOfRange(ThreadId),
    #[error("barrier join needs at least one participant")]
    NoParticipants,
    #[error("clock owner {0} is not a barrier participant")]
    NotParticipant(ThreadId),
}

/// Dense map from thread index to logical time.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct VectorClock(Vec<u64>);

impl VectorClock {
    pub fn zero(width: usize) -> Self {
        VectorClock(vec![0; width])
    }

    pub fn from_vec(v: Vec<u64>) -> Self {
        VectorClock(v)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u64 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn set(&mut self, i: usize, t: u64) {
        self.0[i] = t;
    }

    /// Pointwise maximum.
    pub fn join(&self, other: &VectorClock) -> Result<VectorClock, VClockError> {
        self.check_width(other)?;
        Ok(VectorClock(self.0.iter().zip(&other.0).map(|(a, b)| *a.max(b)).collect()))
    }

    pub fn join_assign(&mut self, other: &VectorClock) {
        debug_assert_eq!(self.width(), other.width());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = (*a).max(*b);
        }
    }

    /// `self ⊑ other`.
    pub fn leq(&self, other: &VectorClock) -> Result<bool, VClockError> {
        self.check_width(other)?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }

    fn check_width(&self, other: &VectorClock) -> Result<(), VClockError> {
        if self.width() == other.width() {
            Ok(())
        } else {
            Err(VClockError::WidthMismatch(self.width(), other.width()))
        }
    }
}

impl fmt::Debug for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Last access by one thread: `time@tid`. Time 0 is the "never accessed"
/// sentinel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Epoch {
    pub time: u64,
    pub tid: ThreadId,
}

impl Epoch {
    pub const NEVER: Epoch = Epoch { time: 0, tid: ThreadId::new(0, 0, 0) };

    pub fn new(time: u64, tid: ThreadId) -> Self {
        debug_assert!(time > 0);
        Epoch { time, tid }
    }

    pub fn is_set(&self) -> bool {
        self.time > 0
    }
}

/// `e ⊑ c`: the access `e` is ordered before the holder of `c`.
pub fn epoch_leq(cfg: &Config, e: Epoch, c: &VectorClock) -> bool {
    !e.is_set() || e.time <= c.get(cfg.index(e.tid))
}

/// Operations the detectors need from a per-thread clock. Implemented by
/// the dense [`VectorClock`] and by [`CompressedPtvc`]; both must agree on
/// every observable value.
pub trait Clock: Clone + fmt::Debug {
    fn zero(cfg: &Config) -> Self;
    fn get(&self, cfg: &Config, tid: ThreadId) -> u64;
    fn set(&mut self, cfg: &Config, tid: ThreadId, t: u64);
    fn join_assign(&mut self, other: &Self);
    fn leq(&self, other: &Self) -> bool;
    /// Joint clock after a barrier among `participants` (one per clock in
    /// `clocks`, in the same order). Dense clocks take the plain join;
    /// compressed clocks apply the forced-compression rule.
    fn barrier_join(cfg: &Config, clocks: &[&Self], participants: &[ThreadId]) -> Self;
    fn to_dense(&self, cfg: &Config) -> VectorClock;
    /// Representation counters; `None` for representations without structure.
    fn compression(&self) -> Option<CompressionCounts> {
        None
    }
}

impl Clock for VectorClock {
    fn zero(cfg: &Config) -> Self {
        VectorClock::zero(cfg.thread_count())
    }

    fn get(&self, cfg: &Config, tid: ThreadId) -> u64 {
        VectorClock::get(self, cfg.index(tid))
    }

    fn set(&mut self, cfg: &Config, tid: ThreadId, t: u64) {
        VectorClock::set(self, cfg.index(tid), t)
    }

    fn join_assign(&mut self, other: &Self) {
        VectorClock::join_assign(self, other)
    }

    fn leq(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    fn barrier_join(cfg: &Config, clocks: &[&Self], _participants: &[ThreadId]) -> Self {
        let mut out = VectorClock::zero(cfg.thread_count());
        for c in clocks {
            out.join_assign(c);
        }
        out
    }

    fn to_dense(&self, _cfg: &Config) -> VectorClock {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vc(v: &[u64]) -> VectorClock {
        VectorClock::from_vec(v.to_vec())
    }

    #[test]
    fn join_examples() {
        assert_eq!(vc(&[1, 0]).join(&vc(&[0, 2])).unwrap(), vc(&[1, 2]));
        assert_eq!(vc(&[3, 1]).join(&vc(&[1, 3])).unwrap(), vc(&[3, 3]));
        let a = vc(&[4, 0, 9]);
        assert_eq!(a.join(&a).unwrap(), a);
        assert_eq!(vc(&[1]).join(&vc(&[1, 2])), Err(VClockError::WidthMismatch(1, 2)));
    }

    #[test]
    fn leq_examples() {
        assert!(vc(&[1, 2]).leq(&vc(&[2, 2])).unwrap());
        assert!(!vc(&[2, 0]).leq(&vc(&[1, 5])).unwrap());
        assert!(VectorClock::zero(3).leq(&vc(&[0, 7, 1])).unwrap());
        assert!(vc(&[1]).leq(&vc(&[])).is_err());
    }

    #[test]
    fn epoch_examples() {
        let cfg = Config::new(1, 1, 2);
        let t1 = ThreadId::new(0, 0, 1);
        let c = vc(&[0, 3]);
        assert!(epoch_leq(&cfg, Epoch::NEVER, &c));
        assert!(epoch_leq(&cfg, Epoch::new(3, t1), &c));
        assert!(!epoch_leq(&cfg, Epoch::new(4, t1), &c));
    }

    #[test]
    fn epoch_agrees_with_singleton_clock() {
        let cfg = Config::new(2, 1, 2);
        for tid in cfg.threads() {
            for time in 1..4 {
                let e = Epoch::new(time, tid);
                let mut single = VectorClock::zero(cfg.thread_count());
                single.set(cfg.index(tid), time);
                for probe in 0..5 {
                    let c = VectorClock::from_vec(vec![probe; cfg.thread_count()]);
                    assert_eq!(epoch_leq(&cfg, e, &c), single.leq(&c).unwrap());
                }
            }
        }
    }
}
