//! Persistent ordered-set treap with path-copying updates.
//!
//! Every update copies the nodes it visits and shares the rest of the tree
//! with the previous version, so a [`Version`] is an immutable snapshot that
//! stays valid (and unchanged) for as long as someone holds it. Updates are
//! built from persistent split/merge passes: nodes are only ever allocated,
//! never rotated or mutated in place.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

type Link = Option<Arc<TreapNode>>;

/// An immutable treap node. Children are shared between versions.
///
/// Invariants: keys obey BST order, priorities obey max-heap order, and a
/// node is never modified after construction.
#[derive(Debug)]
pub struct TreapNode {
    key: i64,
    priority: u64,
    left: Link,
    right: Link,
}

impl TreapNode {
    fn new(key: i64, priority: u64, left: Link, right: Link) -> Arc<Self> {
        Arc::new(TreapNode {
            key,
            priority,
            left,
            right,
        })
    }

    pub fn key(&self) -> i64 {
        self.key
    }

    pub fn priority(&self) -> u64 {
        self.priority
    }

    pub fn left(&self) -> Option<&Arc<TreapNode>> {
        self.left.as_ref()
    }

    pub fn right(&self) -> Option<&Arc<TreapNode>> {
        self.right.as_ref()
    }
}

/// Identity token of a [`Version`]. Tokens are minted from one global
/// monotone counter, so no two distinct versions ever share one and a token
/// is never reissued. Clones of a version keep its token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionId(pub u64);

impl std::fmt::Display for VersionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

static NEXT_VERSION_ID: AtomicU64 = AtomicU64::new(1);

fn mint_version_id() -> VersionId {
    VersionId(NEXT_VERSION_ID.fetch_add(1, Ordering::Relaxed))
}

/// A handle to one immutable snapshot of the set.
///
/// Cloning is cheap (one refcount bump) and preserves identity. A version
/// and everything reachable from it remain valid until the last holder
/// drops it.
#[derive(Debug, Clone)]
pub struct Version {
    root: Link,
    id: VersionId,
}

/// Deterministic priority: a 64-bit avalanche mix of the key, so the tree
/// shape is identical across runs and across threads inserting the same keys.
fn priority_for(key: i64) -> u64 {
    let mut z = (key as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splits `link` into `(keys < key, keys >= key)`, copying the split path.
fn split(link: &Link, key: i64) -> (Link, Link) {
    match link {
        None => (None, None),
        Some(node) => {
            if node.key < key {
                let (lo, hi) = split(&node.right, key);
                (
                    Some(TreapNode::new(
                        node.key,
                        node.priority,
                        node.left.clone(),
                        lo,
                    )),
                    hi,
                )
            } else {
                let (lo, hi) = split(&node.left, key);
                (
                    lo,
                    Some(TreapNode::new(
                        node.key,
                        node.priority,
                        hi,
                        node.right.clone(),
                    )),
                )
            }
        }
    }
}

/// Merges two treaps where every key of `a` precedes every key of `b`,
/// copying the merge spine.
fn merge(a: &Link, b: &Link) -> Link {
    match (a, b) {
        (None, _) => b.clone(),
        (_, None) => a.clone(),
        (Some(x), Some(y)) => {
            if x.priority >= y.priority {
                Some(TreapNode::new(
                    x.key,
                    x.priority,
                    x.left.clone(),
                    merge(&x.right, b),
                ))
            } else {
                Some(TreapNode::new(
                    y.key,
                    y.priority,
                    merge(a, &y.left),
                    y.right.clone(),
                ))
            }
        }
    }
}

/// Inserts `key` (known absent) with `priority`, copying the search path and
/// splitting the first subtree whose root has a smaller priority.
fn insert_at(link: &Link, key: i64, priority: u64) -> Link {
    match link {
        None => Some(TreapNode::new(key, priority, None, None)),
        Some(node) => {
            if priority > node.priority {
                let (lo, hi) = split(link, key);
                Some(TreapNode::new(key, priority, lo, hi))
            } else if key < node.key {
                Some(TreapNode::new(
                    node.key,
                    node.priority,
                    insert_at(&node.left, key, priority),
                    node.right.clone(),
                ))
            } else {
                Some(TreapNode::new(
                    node.key,
                    node.priority,
                    node.left.clone(),
                    insert_at(&node.right, key, priority),
                ))
            }
        }
    }
}

/// Removes `key` (known present): copies the path down to it and merges its
/// subtrees in its place.
fn remove_at(link: &Link, key: i64) -> Link {
    let node = link.as_ref().expect("remove_at: key must be present");
    if key < node.key {
        Some(TreapNode::new(
            node.key,
            node.priority,
            remove_at(&node.left, key),
            node.right.clone(),
        ))
    } else if key > node.key {
        Some(TreapNode::new(
            node.key,
            node.priority,
            node.left.clone(),
            remove_at(&node.right, key),
        ))
    } else {
        merge(&node.left, &node.right)
    }
}

impl Version {
    /// The empty set.
    pub fn empty() -> Self {
        Version {
            root: None,
            id: mint_version_id(),
        }
    }

    fn with_root(root: Link) -> Self {
        Version {
            root,
            id: mint_version_id(),
        }
    }

    #[cfg(test)]
    fn from_raw(root: Link) -> Self {
        Version::with_root(root)
    }

    pub fn id(&self) -> VersionId {
        self.id
    }

    pub fn root(&self) -> Option<&Arc<TreapNode>> {
        self.root.as_ref()
    }

    /// Returns a version containing `key` plus everything in `self`, and
    /// whether the set actually changed. When `key` is already present the
    /// input version itself is returned (same identity, no allocation).
    pub fn insert(&self, key: i64) -> (Version, bool) {
        self.insert_with_priority(key, priority_for(key))
    }

    pub(crate) fn insert_with_priority(&self, key: i64, priority: u64) -> (Version, bool) {
        if self.contains(key) {
            return (self.clone(), false);
        }
        (Version::with_root(insert_at(&self.root, key, priority)), true)
    }

    /// Returns a version without `key`, and whether the set actually
    /// changed. Removing an absent key returns the input version itself.
    pub fn remove(&self, key: i64) -> (Version, bool) {
        if !self.contains(key) {
            return (self.clone(), false);
        }
        (Version::with_root(remove_at(&self.root, key)), true)
    }

    /// Membership test. Performs no allocation.
    pub fn contains(&self, key: i64) -> bool {
        let mut cur = self.root.as_deref();
        while let Some(node) = cur {
            cur = if key < node.key {
                node.left.as_deref()
            } else if key > node.key {
                node.right.as_deref()
            } else {
                return true;
            };
        }
        false
    }

    /// Strictly increasing enumeration of the keys.
    pub fn to_sorted_vec(&self) -> Vec<i64> {
        fn walk(link: &Link, out: &mut Vec<i64>) {
            if let Some(node) = link {
                walk(&node.left, out);
                out.push(node.key);
                walk(&node.right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Number of keys. Walks the whole tree.
    pub fn len(&self) -> usize {
        fn count(link: &Link) -> usize {
            link.as_ref()
                .map_or(0, |n| 1 + count(&n.left) + count(&n.right))
        }
        count(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Nodes on the longest root-to-leaf path; 0 for the empty set.
    pub fn height(&self) -> usize {
        fn depth(link: &Link) -> usize {
            link.as_ref()
                .map_or(0, |n| 1 + depth(&n.left).max(depth(&n.right)))
        }
        depth(&self.root)
    }
}

/// Number of nodes reachable from `new` but not from `old`, i.e. the nodes
/// freshly allocated by the update that produced `new` from `old`.
///
/// Identity is pointer identity; a subtree whose root is reachable from
/// `old` is entirely reachable from `old`, so shared subtrees are pruned
/// without descending.
pub fn fresh_node_count(old: &Version, new: &Version) -> usize {
    fn collect(link: &Link, out: &mut HashSet<*const TreapNode>) {
        if let Some(node) = link {
            out.insert(Arc::as_ptr(node));
            collect(&node.left, out);
            collect(&node.right, out);
        }
    }
    fn count_fresh(link: &Link, old: &HashSet<*const TreapNode>) -> usize {
        match link {
            None => 0,
            Some(node) => {
                if old.contains(&Arc::as_ptr(node)) {
                    0
                } else {
                    1 + count_fresh(&node.left, old) + count_fresh(&node.right, old)
                }
            }
        }
    }
    let mut old_nodes = HashSet::new();
    collect(&old.root, &mut old_nodes);
    count_fresh(&new.root, &old_nodes)
}
