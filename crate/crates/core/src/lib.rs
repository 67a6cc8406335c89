//! Concurrent ordered set built from a path-copying persistent treap behind
//! a single atomic root register, plus the private-cache cost model that
//! explains why the retry loop scales.
//!
//! - [`treap`]: the immutable ordered-set versions and structural-sharing
//!   utilities.
//! - [`concurrent`]: the lock-free construction — snapshot queries and
//!   CAS-retry updates over a [`RootRegister`].
//! - [`model`]: closed-form cost evaluators and a deterministic simulator
//!   for the private-cache model.

pub mod concurrent;
pub mod model;
pub mod treap;

pub use concurrent::{CasAttempt, ConcurrentSet, RootRegister, UpdateKind, UpdateOutcome};
pub use model::{expected_modified_on_path, simulate, ModelError, ModelParams, SimStats};
pub use treap::{fresh_node_count, TreapNode, Version, VersionId};
