//! Scope algebra shared by every detector.

use crate::trace::{AccessAttr, Scope, ThreadId};

/// A lock as seen through its scope: a device-scoped lock is one instance,
/// a block-scoped lock is a separate instance per block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScopedLockInstance {
    pub lock: u64,
    pub scope: Scope,
}

impl ScopedLockInstance {
    pub const fn new(lock: u64, scope: Scope) -> Self {
        ScopedLockInstance { lock, scope }
    }
}

/// Two instances of one lock overlap when either is device-scoped or both
/// belong to the same block. Returns `None` for instances of different locks.
pub fn scopes_overlap(a: &ScopedLockInstance, b: &ScopedLockInstance) -> Option<bool> {
    (a.lock == b.lock).then(|| scope_pair_overlaps(a.scope, b.scope))
}

pub(crate) fn scope_pair_overlaps(a: Scope, b: Scope) -> bool {
    match (a, b) {
        (Scope::Device, _) | (_, Scope::Device) => true,
        (Scope::Block(x), Scope::Block(y)) => x == y,
    }
}

/// True when a conflicting pair is exempt from race reporting: both
/// accesses are atomic and their scopes cover both threads.
pub fn atomics_cover(a: AccessAttr, b: AccessAttr, tid_a: ThreadId, tid_b: ThreadId) -> bool {
    match (a, b) {
        (Some(sa), Some(sb)) => sa.is_device() || sb.is_device() || tid_a.block == tid_b.block,
        _ => false,
    }
}

/// Whether a release synchronizes with a later acquire on the same variable
/// under scoped happens-before.
pub fn hb_release_acquire_applies(
    release: Scope,
    acquire: Scope,
    rel_tid: ThreadId,
    acq_tid: ThreadId,
) -> bool {
    match (release, acquire) {
        (Scope::Device, _) | (_, Scope::Device) => true,
        (Scope::Block(_), Scope::Block(_)) => rel_tid.block == acq_tid.block,
    }
}
