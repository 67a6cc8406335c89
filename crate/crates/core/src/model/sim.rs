//! Deterministic discrete simulation of the private-cache model.
//!
//! Both phases run the same engine over an external, perfectly balanced
//! tree of `n` keys (levels 0..=log n, leaves at the bottom). Every attempt
//! charges one unit for the root register read, then walks the root-to-leaf
//! path charging 1 per cached node and `r` per uncached one.
//!
//! The sequential phase is one process with a cache of `m` nodes updating in
//! place. The concurrent phase runs `p` synchronous processes with private
//! caches; successful attempts rotate round-robin, every failed attempt
//! restarts on the version produced by the most recent success, and a
//! success path-copies its root-to-leaf path, so those nodes are fresh (and
//! therefore uncached) for every other process. The creator's own cache
//! keeps the nodes it just wrote.
//!
//! Caches are keyed by tree position with a generation check: a resident
//! position whose node was copied since the last visit costs a full reload.
//! Eviction is least-frequently-used with least-recent tie-break, reference
//! counts survive eviction (perfect LFU), and lines loaded by the in-flight
//! attempt are not eviction candidates. Under uniform leaf traffic that
//! converges to exactly the steady state the closed forms assume — the top
//! `log m` tree levels resident, one-touch traffic from the lower levels
//! churning through the remaining slot — while recency-only replacement lets
//! that churn displace about a third of the upper levels and overstates the
//! sequential cost well past the model.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelError, ModelParams};

/// Measured outputs of one [`simulate`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    /// Time units spent by the sequential phase.
    pub sequential_time: u64,
    /// Makespan of the concurrent phase (largest per-process busy time).
    pub concurrent_time: u64,
    /// `sequential_time / concurrent_time`.
    pub measured_speedup: f64,
    /// Mean number of freshly copied nodes found on the path per retry
    /// (attempts after the first); 0 when no retries happened.
    pub avg_modified_on_path: f64,
    /// Mean uncached loads per retry, including nodes lost to capacity.
    pub avg_uncached_loads_retry: f64,
    /// Completed operations per process; rotates round-robin.
    pub successes_per_process: Vec<u64>,
    /// Cache capacity used by the sequential phase (`m`).
    pub sequential_cache_capacity: u64,
    /// Cache capacity used per process in the concurrent phase:
    /// `max(m, log n + 1)`, so one full path always fits.
    pub concurrent_cache_capacity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Access {
    Hit,
    Stale,
    Miss,
}

struct Entry {
    gen: u64,
    freq: u64,
    tick: u64,
}

/// Node cache keyed by tree position. Eviction picks the least-frequently
/// used line, oldest first among ties, but never a line the in-flight
/// attempt has already loaded. Reference counts outlive eviction, so a
/// frequently used position re-enters at its earned rank instead of as
/// one-touch traffic. Each entry stores the generation of the node it holds;
/// a generation mismatch is a stale hit, reloaded in place.
struct NodeCache {
    capacity: usize,
    entries: HashMap<u64, Entry>,
    // Cumulative reference counts, including for evicted positions.
    counts: HashMap<u64, u64>,
    // (freq, tick, pos); ticks are unique per cache, so ordering is total.
    index: BTreeSet<(u64, u64, u64)>,
    tick: u64,
    // Lines with tick >= watermark belong to the current attempt.
    watermark: u64,
}

impl NodeCache {
    fn new(capacity: u64) -> Self {
        let capacity = usize::try_from(capacity).expect("cache capacity fits usize");
        NodeCache {
            capacity,
            entries: HashMap::with_capacity(capacity + 1),
            counts: HashMap::new(),
            index: BTreeSet::new(),
            tick: 0,
            watermark: 0,
        }
    }

    /// Marks the start of an operation attempt; everything loaded from here
    /// on is pinned until the next attempt starts.
    fn begin_attempt(&mut self) {
        self.watermark = self.tick + 1;
    }

    fn touch(&mut self, pos: u64, current_gen: u64) -> Access {
        self.tick += 1;
        let tick = self.tick;
        let freq = {
            let count = self.counts.entry(pos).or_insert(0);
            *count += 1;
            *count
        };
        if let Some(entry) = self.entries.get_mut(&pos) {
            let outcome = if entry.gen == current_gen {
                Access::Hit
            } else {
                Access::Stale
            };
            self.index.remove(&(entry.freq, entry.tick, pos));
            entry.gen = current_gen;
            entry.freq = freq;
            entry.tick = tick;
            self.index.insert((freq, tick, pos));
            return outcome;
        }
        if self.entries.len() == self.capacity {
            self.evict();
        }
        self.entries.insert(
            pos,
            Entry {
                gen: current_gen,
                freq,
                tick,
            },
        );
        self.index.insert((freq, tick, pos));
        Access::Miss
    }

    /// Marks a just-copied node as present at its new generation without
    /// touching frequency or recency: the creator wrote the node, it did not
    /// re-reference the position.
    fn refresh(&mut self, pos: u64, gen: u64) {
        if let Some(entry) = self.entries.get_mut(&pos) {
            entry.gen = gen;
        }
    }

    fn evict(&mut self) {
        // At most one path of lines can sit above the watermark, so this
        // scan is short; fall back to the global minimum when the cache is
        // smaller than a path.
        let victim = self
            .index
            .iter()
            .find(|(_, tick, _)| *tick < self.watermark)
            .or_else(|| self.index.iter().next())
            .copied()
            .expect("evicting from a non-empty cache");
        self.index.remove(&victim);
        self.entries.remove(&victim.2);
    }
}

struct PhaseResult {
    busy: Vec<u64>,
    successes: Vec<u64>,
    retry_attempts: u64,
    retry_stale: u64,
    retry_uncached: u64,
}

/// Runs `params.t()` timed successful operations over `processes`
/// synchronous actors, preceded by the same number of untimed warm-up
/// operations: the closed forms describe the caches' steady state, so the
/// measured phase starts from it rather than from a cold cache. With
/// `path_copy` every success bumps the generation of the nodes on its path;
/// without it the tree is updated in place (the sequential baseline).
/// Process `q` draws its keys from stream `q` of the seeded generator, so
/// the sequential phase and process 0 see the same keys.
fn run_phase(
    params: &ModelParams,
    processes: usize,
    capacity: u64,
    path_copy: bool,
    seed: u64,
) -> PhaseResult {
    let levels = params.log2_n();
    let n = params.n();
    let r_cost = params.r();

    let mut caches: Vec<NodeCache> = (0..processes).map(|_| NodeCache::new(capacity)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..processes)
        .map(|q| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(q as u64);
            rng
        })
        .collect();
    let mut targets: Vec<u64> = rngs.iter_mut().map(|rng| rng.gen_range(0..n)).collect();
    let mut attempt = vec![1u64; processes];
    let mut busy = vec![0u64; processes];
    let mut successes = vec![0u64; processes];
    // Tree position -> generation of the node currently there. Positions
    // never copied sit at generation 0.
    let mut gens: HashMap<u64, u64> = HashMap::new();

    let mut retry_attempts = 0u64;
    let mut retry_stale = 0u64;
    let mut retry_uncached = 0u64;

    let path_positions = |leaf: u64| (0..=levels).map(move |k| (1u64 << k) + (leaf >> (levels - k)));

    let warmup = params.t();
    for round in 1..=(warmup + params.t()) {
        let timed = round > warmup;
        let winner = ((round - 1) % processes as u64) as usize;
        // Every process walks the version left by the most recent success.
        for (q, cache) in caches.iter_mut().enumerate() {
            let mut cost = 1u64; // root register read: one hot word
            let mut stale = 0u64;
            let mut uncached = 0u64;
            cache.begin_attempt();
            for pos in path_positions(targets[q]) {
                let gen = if path_copy {
                    gens.get(&pos).copied().unwrap_or(0)
                } else {
                    0
                };
                match cache.touch(pos, gen) {
                    Access::Hit => cost += 1,
                    Access::Stale => {
                        cost += r_cost;
                        stale += 1;
                        uncached += 1;
                    }
                    Access::Miss => {
                        cost += r_cost;
                        uncached += 1;
                    }
                }
            }
            if timed {
                busy[q] += cost;
                if attempt[q] >= 2 {
                    retry_attempts += 1;
                    retry_stale += stale;
                    retry_uncached += uncached;
                }
            }
            attempt[q] += 1;
        }
        // The scheduled winner's CAS succeeds; everyone else will retry on
        // the version it just installed.
        if path_copy {
            for pos in path_positions(targets[winner]) {
                gens.insert(pos, round);
                caches[winner].refresh(pos, round);
            }
        }
        if timed {
            successes[winner] += 1;
        }
        targets[winner] = rngs[winner].gen_range(0..n);
        attempt[winner] = 1;
    }

    PhaseResult {
        busy,
        successes,
        retry_attempts,
        retry_stale,
        retry_uncached,
    }
}

/// Runs the sequential and concurrent phases of the model under one seed and
/// reports measured times, speedup, and retry statistics.
pub fn simulate(params: &ModelParams, seed: u64) -> Result<SimStats, ModelError> {
    if params.m() == params.n() {
        return Err(ModelError::CacheEqualsTree);
    }
    let path_len = u64::from(params.log2_n()) + 1;
    let sequential_capacity = params.m();
    let concurrent_capacity = params.m().max(path_len);

    let sequential = run_phase(params, 1, sequential_capacity, false, seed);
    let concurrent = run_phase(
        params,
        params.p() as usize,
        concurrent_capacity,
        true,
        seed,
    );

    let sequential_time = sequential.busy[0];
    let concurrent_time = *concurrent.busy.iter().max().expect("p >= 1");
    let per_retry = |total: u64| {
        if concurrent.retry_attempts == 0 {
            0.0
        } else {
            total as f64 / concurrent.retry_attempts as f64
        }
    };

    Ok(SimStats {
        sequential_time,
        concurrent_time,
        measured_speedup: sequential_time as f64 / concurrent_time as f64,
        avg_modified_on_path: per_retry(concurrent.retry_stale),
        avg_uncached_loads_retry: per_retry(concurrent.retry_uncached),
        successes_per_process: concurrent.successes,
        sequential_cache_capacity: sequential_capacity,
        concurrent_cache_capacity: concurrent_capacity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expected_modified_on_path;

    fn params(n: u64, m: u64, r: u64, p: u64, t: u64) -> ModelParams {
        ModelParams::new(n, m, r, p, t).unwrap()
    }

    #[test]
    fn single_process_matches_sequential_phase() {
        // Cache holds a full path, so both phases use the same capacity.
        let p = params(1 << 10, 1 << 5, 10, 1, 2000);
        let stats = simulate(&p, 7).unwrap();
        assert_eq!(stats.avg_modified_on_path, 0.0);
        assert_eq!(stats.concurrent_time, stats.sequential_time);
        assert_eq!(stats.measured_speedup, 1.0);
        assert_eq!(stats.successes_per_process, vec![2000]);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = params(1 << 12, 1 << 6, 50, 4, 3000);
        let a = simulate(&p, 99).unwrap();
        let b = simulate(&p, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, 100).unwrap();
        assert_ne!(a.sequential_time, c.sequential_time);
    }

    #[test]
    fn successes_rotate_round_robin() {
        let p = params(1 << 12, 1 << 6, 50, 7, 4001);
        let stats = simulate(&p, 3).unwrap();
        let total: u64 = stats.successes_per_process.iter().sum();
        assert_eq!(total, 4001);
        let max = stats.successes_per_process.iter().max().unwrap();
        let min = stats.successes_per_process.iter().min().unwrap();
        assert!(max - min <= 1);
    }

    #[test]
    fn rejects_cache_equal_to_tree() {
        let p = params(1 << 8, 1 << 8, 10, 2, 100);
        assert_eq!(simulate(&p, 0), Err(ModelError::CacheEqualsTree));
    }

    #[test]
    fn small_cache_is_floored_to_one_path() {
        let p = params(1 << 12, 1 << 2, 10, 2, 500);
        let stats = simulate(&p, 11).unwrap();
        assert_eq!(stats.sequential_cache_capacity, 4);
        assert_eq!(stats.concurrent_cache_capacity, 13);
    }

    #[test]
    fn retry_loads_track_the_modified_node_lemma() {
        let p = params(1 << 16, 1 << 8, 100, 16, 10_000);
        let stats = simulate(&p, 0xA11CE).unwrap();
        assert!(
            stats.avg_modified_on_path >= 1.8 && stats.avg_modified_on_path <= 2.2,
            "avg modified {:.4}",
            stats.avg_modified_on_path
        );
        let lemma = expected_modified_on_path(16).unwrap();
        let rel = (stats.avg_uncached_loads_retry - lemma).abs() / lemma;
        assert!(
            rel <= 0.10,
            "uncached per retry {:.4} vs lemma {lemma:.4}",
            stats.avg_uncached_loads_retry
        );
    }

    #[test]
    fn measured_speedup_tracks_the_closed_form() {
        let p = params(1 << 16, 1 << 8, 100, 16, 10_000);
        let stats = simulate(&p, 0xA11CE).unwrap();
        let analytic = p.analytic_speedup().unwrap();
        let rel = (stats.measured_speedup - analytic).abs() / analytic;
        assert!(
            rel <= 0.25,
            "measured {:.4} vs analytic {analytic:.4} (rel {rel:.3})",
            stats.measured_speedup
        );
    }

    #[test]
    fn sequential_phase_tracks_the_closed_form() {
        // The cached-level quantization keeps the simulated sequential cost
        // near, and slightly above, the closed form.
        let p = params(1 << 16, 1 << 8, 100, 1, 10_000);
        let stats = simulate(&p, 5).unwrap();
        let analytic = p.analytic_sequential_cost();
        let ratio = stats.sequential_time as f64 / analytic;
        assert!(
            ratio > 1.0 && ratio < 1.2,
            "sequential time {} vs analytic {analytic} (ratio {ratio:.3})",
            stats.sequential_time
        );
    }
}
