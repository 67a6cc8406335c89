//! Lock-free concurrent ordered set over persistent treap versions.
//!
//! The whole construction is one atomic register holding the current
//! [`Version`]. Queries read the register once and run on the snapshot they
//! got; no concurrent update can touch it. Updates read the current version,
//! build a replacement with path copying, and try to install it with a
//! compare-and-swap keyed on version identity; a failed CAS means some other
//! update got installed first, so the loser rebuilds from the fresh version
//! and tries again. A failed CAS always implies another thread's success, so
//! updates are lock-free; snapshots are a single atomic read.

use crossbeam_epoch::{self as epoch, Atomic, Owned};
use std::sync::atomic::Ordering;

use crate::treap::{Version, VersionId};

/// The single entry point of the construction: an atomic cell holding the
/// current version.
///
/// Installed versions form a totally ordered chain with strictly increasing
/// identity tokens; a compare-and-swap only succeeds against the exact
/// version the caller read. Identity tokens are never reused, so there is no
/// ABA window. Replaced cells are reclaimed through epochs once no reader
/// can still observe them; snapshot holders keep the tree itself alive
/// independently through the version's own reference counts.
pub struct RootRegister {
    cell: Atomic<Version>,
}

impl RootRegister {
    pub fn new(initial: Version) -> Self {
        RootRegister {
            cell: Atomic::new(initial),
        }
    }

    /// Wait-free read of the current version. The returned handle stays
    /// valid indefinitely, unaffected by later updates.
    pub fn snapshot(&self) -> Version {
        let guard = epoch::pin();
        let shared = self.cell.load(Ordering::Acquire, &guard);
        // Installed versions are fully constructed before the releasing CAS.
        unsafe { shared.deref() }.clone()
    }

    pub fn current_id(&self) -> VersionId {
        let guard = epoch::pin();
        let shared = self.cell.load(Ordering::Acquire, &guard);
        unsafe { shared.deref() }.id()
    }

    /// Installs `next` iff the currently installed version is `expected`.
    ///
    /// On failure returns the version that was actually current, so the
    /// caller retries against it rather than its stale read. `next` must
    /// have been derived from the expected version, which makes its identity
    /// token strictly newer than everything installed so far.
    pub fn compare_and_install(&self, expected: VersionId, next: Version) -> Result<(), Version> {
        let guard = epoch::pin();
        let current = self.cell.load(Ordering::Acquire, &guard);
        let current_ref = unsafe { current.deref() };
        if current_ref.id() != expected {
            return Err(current_ref.clone());
        }
        assert!(
            next.id() > expected,
            "candidate version must be newer than the one it replaces"
        );
        // The identity check above ran under the same pin as this CAS, and a
        // pinned cell cannot be reclaimed or reused, so pointer equality here
        // is exactly identity equality.
        match self.cell.compare_exchange(
            current,
            Owned::new(next),
            Ordering::AcqRel,
            Ordering::Acquire,
            &guard,
        ) {
            Ok(_) => {
                unsafe { guard.defer_destroy(current) };
                Ok(())
            }
            Err(err) => Err(unsafe { err.current.deref() }.clone()),
        }
    }
}

impl Drop for RootRegister {
    fn drop(&mut self) {
        // Sole owner at this point; reclaim the final cell directly.
        unsafe {
            let shared = self.cell.load(Ordering::Relaxed, epoch::unprotected());
            drop(shared.into_owned());
        }
    }
}

/// Whether an update was an insert or a remove. Exposed to the pre-CAS hook.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Insert,
    Remove,
}

/// Everything a pre-CAS hook gets to see about the attempt it intercepts.
#[derive(Debug, Clone, Copy)]
pub struct CasAttempt {
    pub kind: UpdateKind,
    pub key: i64,
    /// 1-based try counter within this operation.
    pub attempt: u64,
    /// Version the attempt read and built upon.
    pub current: VersionId,
    /// Version the attempt will try to install.
    pub candidate: VersionId,
}

/// Test-only interposition point: called after an update attempt has built
/// its candidate version and before it issues the CAS. Lets tests force a
/// particular CAS interleaving (e.g. park one updater mid-flight) without
/// touching the production path.
pub type PreCasHook = dyn Fn(&CasAttempt) + Send + Sync;

/// Result of a concurrent insert or remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateOutcome {
    /// Whether the set changed (insert of an absent key, remove of a present one).
    pub applied: bool,
    /// Number of tries, including the one that settled the operation.
    pub attempts: u64,
    /// Identity of the version this operation linearized at: the version it
    /// installed when applied, or the version it observed when it was a no-op.
    pub version: VersionId,
}

/// A linearizable ordered set: persistent treap versions behind a
/// [`RootRegister`].
pub struct ConcurrentSet {
    register: RootRegister,
    pre_cas_hook: Option<Box<PreCasHook>>,
}

impl ConcurrentSet {
    pub fn new(initial: Version) -> Self {
        ConcurrentSet {
            register: RootRegister::new(initial),
            pre_cas_hook: None,
        }
    }

    /// Like [`ConcurrentSet::new`], with a hook invoked before every CAS.
    pub fn with_pre_cas_hook(initial: Version, hook: Box<PreCasHook>) -> Self {
        ConcurrentSet {
            register: RootRegister::new(initial),
            pre_cas_hook: Some(hook),
        }
    }

    pub fn register(&self) -> &RootRegister {
        &self.register
    }

    /// Current version; queries of any length run on it undisturbed.
    pub fn snapshot(&self) -> Version {
        self.register.snapshot()
    }

    pub fn insert(&self, key: i64) -> UpdateOutcome {
        self.update(UpdateKind::Insert, key)
    }

    pub fn remove(&self, key: i64) -> UpdateOutcome {
        self.update(UpdateKind::Remove, key)
    }

    /// Equivalent to `self.snapshot().contains(key)`.
    pub fn contains(&self, key: i64) -> bool {
        self.snapshot().contains(key)
    }

    /// Read current version, apply the sequential update with path copying,
    /// CAS the result in; on CAS failure retry on the freshly installed
    /// version. No backoff: an immediate retry re-walks the tree while it is
    /// still warm.
    fn update(&self, kind: UpdateKind, key: i64) -> UpdateOutcome {
        let mut attempts: u64 = 1;
        let mut current = self.register.snapshot();
        loop {
            let (next, changed) = match kind {
                UpdateKind::Insert => current.insert(key),
                UpdateKind::Remove => current.remove(key),
            };
            if !changed {
                // No-op update: linearizes at the read of `current`.
                return UpdateOutcome {
                    applied: false,
                    attempts,
                    version: current.id(),
                };
            }
            let candidate = next.id();
            if let Some(hook) = &self.pre_cas_hook {
                hook(&CasAttempt {
                    kind,
                    key,
                    attempt: attempts,
                    current: current.id(),
                    candidate,
                });
            }
            match self.register.compare_and_install(current.id(), next) {
                Ok(()) => {
                    return UpdateOutcome {
                        applied: true,
                        attempts,
                        version: candidate,
                    }
                }
                Err(fresh) => {
                    current = fresh;
                    attempts += 1;
                }
            }
        }
    }
}
