//! Sequential correctness against a sorted-set oracle, persistence of
//! retained versions, and structural-sharing bounds.

use std::collections::BTreeSet;

use pathcopy::{fresh_node_count, Version};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_replay_ten_thousand_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = Version::empty();
    let mut oracle = BTreeSet::new();
    for _ in 0..10_000 {
        let key = rng.gen_range(-1000i64..=1000);
        match rng.gen_range(0u8..3) {
            0 => {
                let (nv, inserted) = v.insert(key);
                assert_eq!(inserted, oracle.insert(key), "insert flag for {key}");
                v = nv;
            }
            1 => {
                let (nv, removed) = v.remove(key);
                assert_eq!(removed, oracle.remove(&key), "remove flag for {key}");
                v = nv;
            }
            _ => {
                assert_eq!(v.contains(key), oracle.contains(&key), "contains {key}");
            }
        }
    }
    let want: Vec<i64> = oracle.iter().copied().collect();
    assert_eq!(v.to_sorted_vec(), want);
    assert_eq!(v.len(), oracle.len());
}

#[test]
fn retained_versions_replay_their_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x41157);
    let mut v = Version::empty();
    let mut oracle = BTreeSet::new();
    let mut history: Vec<(Version, Vec<i64>)> = Vec::new();
    for _ in 0..1000 {
        let key = rng.gen_range(-500i64..500);
        if rng.gen_bool(0.5) {
            let (nv, _) = v.insert(key);
            oracle.insert(key);
            v = nv;
        } else {
            let (nv, _) = v.remove(key);
            oracle.remove(&key);
            v = nv;
        }
        history.push((v.clone(), oracle.iter().copied().collect()));
    }
    for (step, (version, expected)) in history.iter().enumerate() {
        assert_eq!(&version.to_sorted_vec(), expected, "diverged at step {step}");
    }
}

#[test]
fn sharing_bound_over_random_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51a4e);
    let mut v = Version::empty();
    let mut keys: Vec<i64> = Vec::new();
    while keys.len() < 10_000 {
        let key = rng.gen_range(-1_000_000i64..=1_000_000);
        let (nv, inserted) = v.insert(key);
        if inserted {
            keys.push(key);
        }
        v = nv;
    }
    for step in 0..300 {
        let height = v.height();
        let bound = 4 * (height + 1);
        let (next, fresh) = if rng.gen_bool(0.5) {
            let key = rng.gen_range(-1_000_000i64..=1_000_000);
            let (nv, _) = v.insert(key);
            (nv.clone(), fresh_node_count(&v, &nv))
        } else {
            let key = keys[rng.gen_range(0..keys.len())];
            let (nv, _) = v.remove(key);
            let f = fresh_node_count(&v, &nv);
            let (nv, _) = nv.insert(key); // keep the removable pool intact
            (nv, f)
        };
        assert!(fresh <= bound, "step {step}: fresh {fresh} > bound {bound}");
        v = next;
    }
}

/// Randomized-height sanity: with avalanche-mixed priorities the treap
/// stays logarithmic. Loose bound, informative.
#[test]
fn height_stays_logarithmic() {
    let n = 100_000usize;
    let bound = (5.0 * (n as f64).log2()).floor() as usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Version::empty();
        let mut inserted = 0usize;
        while inserted < n {
            let (nv, fresh) = v.insert(rng.gen());
            if fresh {
                inserted += 1;
            }
            v = nv;
        }
        let h = v.height();
        assert!(h <= bound, "seed {seed}: height {h} > {bound}");
    }
}
