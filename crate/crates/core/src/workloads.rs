//! Litmus corpus with expected verdicts, and a seeded random trace
//! generator for property tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::trace::{parse_trace, BarrierKind, Config, EventKind, Location, Scope, ThreadId, Trace};

/// Race / no-race verdict of each analysis on one trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub gwcp: bool,
    pub hb: bool,
    pub lockset: bool,
    pub oracle: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Litmus {
    pub name: &'static str,
    pub summary: &'static str,
    #[serde(skip)]
    pub text: &'static str,
    pub expected: Verdicts,
}

const fn v(gwcp: bool, hb: bool, lockset: bool, oracle: bool) -> Verdicts {
    Verdicts { gwcp, hb, lockset, oracle }
}

macro_rules! litmus {
    ($name:literal, $summary:literal, $expected:expr) => {
        Litmus {
            name: $name,
            summary: $summary,
            text: include_str!(concat!("../corpus/", $name, ".trace")),
            expected: $expected,
        }
    };
}

pub const CORPUS: &[Litmus] = &[
    litmus!("wcp-classic", "non-conflicting critical sections around unprotected x", v(true, false, false, true)),
    litmus!("no-cp", "early write inside a later critical section", v(true, false, true, true)),
    litmus!("scoped-cs", "block-scoped and device-scoped sections on one lock", v(true, false, true, true)),
    litmus!("block-scoped-lock", "block-scoped lock within one block", v(false, false, false, false)),
    litmus!("insufficient-scope-cs", "block-scoped lock shared across blocks", v(true, true, true, true)),
    litmus!("predictable-race-scord", "unprotected accesses, writer fences first", v(true, true, false, true)),
    litmus!("fence-only", "writes separated only by a device fence", v(true, true, false, true)),
    litmus!("its-intrawarp", "divergent lanes communicating without syncwarp", v(true, true, true, true)),
    litmus!("same-instr-intrawarp", "one coalesced store with colliding lanes", v(true, true, true, true)),
    litmus!("barrier-separated", "conflicts on both sides of a block barrier", v(false, false, false, false)),
    litmus!("partial-warp-barrier", "syncwarp whose mask misses a writer", v(true, true, true, true)),
    litmus!("device-atomics", "device-scoped atomics across blocks", v(false, false, false, false)),
    litmus!("block-atomics", "block-scoped atomics across blocks", v(true, true, true, true)),
    litmus!("hb-hides-race", "lock order carried through an unrelated lock", v(false, false, false, true)),
    litmus!("early-conflict-cs", "sections conflict before the racy write", v(false, false, true, true)),
    litmus!("warp-lock", "one lane locks on behalf of its warp", v(false, false, false, false)),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("unknown corpus trace `{0}`")]
    UnknownName(String),
    #[error("random trace caps exceeded: {0}")]
    Caps(&'static str),
}

pub fn litmus(name: &str) -> Option<&'static Litmus> {
    CORPUS.iter().find(|l| l.name == name)
}

/// The corpus trace `name`, as written (ad-hoc locks not yet inferred).
pub fn gen_litmus(name: &str) -> Result<Trace, WorkloadError> {
    let l = litmus(name).ok_or_else(|| WorkloadError::UnknownName(name.to_string()))?;
    Ok(parse_trace(l.text).expect("corpus traces parse"))
}

/// Upper bounds for [`gen_random`]. Geometry is drawn per trace within
/// `blocks × warps × lanes`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomConfig {
    pub blocks: u32,
    pub warps: u32,
    pub lanes: u32,
    pub events: usize,
    pub locks: u64,
    pub locations: u64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { blocks: 2, warps: 2, lanes: 2, events: 12, locks: 2, locations: 3 }
    }
}

/// Largest event count accepted by [`gen_random`].
pub const MAX_RANDOM_EVENTS: usize = 30;

/// Deterministic random trace: plain accesses, non-nested scoped locks that
/// respect mutual exclusion, fences, block and warp barriers, and exits.
/// Every result passes validation.
pub fn gen_random(seed: u64, caps: &RandomConfig) -> Result<Trace, WorkloadError> {
    if caps.blocks == 0 || caps.blocks > 2 || caps.warps == 0 || caps.warps > 2 || caps.lanes == 0 || caps.lanes > 2 {
        return Err(WorkloadError::Caps("geometry must be within 2x2x2"));
    }
    if caps.events > MAX_RANDOM_EVENTS || caps.locks == 0 || caps.locks > 2 || caps.locations == 0 || caps.locations > 3 {
        return Err(WorkloadError::Caps("at most 30 events, 2 locks, 3 locations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = Config::new(
        rng.gen_range(1..=caps.blocks),
        rng.gen_range(1..=caps.warps),
        rng.gen_range(1..=caps.lanes),
    );
    let n = cfg.thread_count();
    let mut trace = Trace::new(cfg);
    let mut held: Vec<Option<(u64, Scope)>> = vec![None; n];
    let mut ended = vec![false; n];
    let target = rng.gen_range(1..=caps.events.max(1));

    while trace.len() < target {
        let live: Vec<ThreadId> = cfg.threads().filter(|t| !ended[cfg.index(*t)]).collect();
        let Some(&t) = live.choose(&mut rng) else { break };
        let ti = cfg.index(t);
        let roll = rng.gen_range(0..100);
        let ev = if roll < 50 {
            let id = rng.gen_range(0..caps.locations);
            // the last location lives in shared memory
            let loc = if id + 1 == caps.locations && caps.locations > 1 {
                Location::Shared { block: t.block, addr: 0x10 * (id + 1) }
            } else {
                Location::Global(0x10 * (id + 1))
            };
            EventKind::Access { tid: t, loc, write: rng.gen_bool(0.5), atomic: None, instr: None }
        } else if roll < 75 {
            match held[ti] {
                Some((lock, scope)) => {
                    held[ti] = None;
                    EventKind::Release { tid: t, lock, scope }
                }
                None => {
                    let lock = rng.gen_range(1..=caps.locks);
                    let scope = if rng.gen_bool(0.5) { Scope::Device } else { Scope::Block(t.block) };
                    let busy = held.iter().any(|h| match h {
                        Some((l, s)) => *l == lock && crate::sync::scope_pair_overlaps(*s, scope),
                        None => false,
                    });
                    if busy {
                        continue;
                    }
                    held[ti] = Some((lock, scope));
                    EventKind::Acquire { tid: t, lock, scope }
                }
            }
        } else if roll < 83 {
            let scope = if rng.gen_bool(0.5) { Scope::Device } else { Scope::Block(t.block) };
            EventKind::Fence { tid: t, scope }
        } else if roll < 90 {
            EventKind::Barrier(BarrierKind::Block { block: t.block, arrived: None })
        } else if roll < 96 {
            let live_lanes = (0..cfg.lanes)
                .filter(|&l| !ended[cfg.index(ThreadId::new(t.block, t.warp, l))])
                .fold(0u64, |m, l| m | 1 << l);
            let mask = (rng.gen_range(1..=cfg.full_mask()) & live_lanes) | 1 << t.lane;
            EventKind::Barrier(BarrierKind::Warp { block: t.block, warp: t.warp, mask })
        } else {
            if held[ti].is_some() {
                continue;
            }
            ended[ti] = true;
            EventKind::End { tid: t }
        };
        trace.push(ev);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::validate_trace;

    #[test]
    fn corpus_parses_and_names_are_unique() {
        let mut names: Vec<&str> = CORPUS.iter().map(|l| l.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CORPUS.len());
        for l in CORPUS {
            gen_litmus(l.name).unwrap();
        }
        assert_eq!(gen_litmus("nope"), Err(WorkloadError::UnknownName("nope".into())));
    }

    #[test]
    fn random_traces_are_deterministic_and_valid() {
        let caps = RandomConfig::default();
        for seed in 0..1000 {
            let t = gen_random(seed, &caps).unwrap();
            assert_eq!(t, gen_random(seed, &caps).unwrap());
            assert!(t.len() <= caps.events);
            assert_eq!(validate_trace(&t), vec![], "seed {seed}");
        }
    }

    #[test]
    fn caps_are_enforced() {
        let caps = RandomConfig { events: 31, ..RandomConfig::default() };
        assert!(gen_random(0, &caps).is_err());
        let caps = RandomConfig { lanes: 3, ..RandomConfig::default() };
        assert!(gen_random(0, &caps).is_err());
    }
}
