//! Cost model for path-copying updates under private per-process caches.
//!
//! The model works on an idealized external balanced tree of `N` keys where
//! every operation walks one root-to-leaf path, a cached node load costs one
//! time unit and an uncached one costs `R`. Closed forms cover the
//! sequential execution, the per-operation cost of the concurrent retry
//! scheme, and their ratio; [`simulate`] runs the same model as a
//! deterministic discrete simulation and measures what the closed forms
//! predict.

mod sim;

pub use sim::{simulate, SimStats};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("path depth must be at least 1")]
    ZeroDepth,
    #[error("{0} must be at least 1")]
    FieldZero(&'static str),
    #[error("{0} must be a power of two, got {1}")]
    NotPowerOfTwo(&'static str, u64),
    #[error("cache size m={m} must not exceed tree size n={n}")]
    CacheExceedsTree { m: u64, n: u64 },
    #[error("m = n is only meaningful for the sequential cost; this evaluator needs m < n")]
    CacheEqualsTree,
}

/// Model parameters: tree size `n`, per-process cache capacity `m` (both
/// powers of two), uncached load cost `r`, process count `p`, and operation
/// count `t`.
///
/// `m == n` is admitted at construction solely so the all-cached boundary of
/// the sequential cost can be expressed; the speedup evaluator and the
/// simulator require `m < n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    n: u64,
    m: u64,
    r: u64,
    p: u64,
    t: u64,
}

impl ModelParams {
    pub fn new(n: u64, m: u64, r: u64, p: u64, t: u64) -> Result<Self, ModelError> {
        for (name, value) in [("n", n), ("m", m), ("r", r), ("p", p), ("t", t)] {
            if value == 0 {
                return Err(ModelError::FieldZero(name));
            }
        }
        if !n.is_power_of_two() {
            return Err(ModelError::NotPowerOfTwo("n", n));
        }
        if !m.is_power_of_two() {
            return Err(ModelError::NotPowerOfTwo("m", m));
        }
        if m > n {
            return Err(ModelError::CacheExceedsTree { m, n });
        }
        Ok(ModelParams { n, m, r, p, t })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn log2_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn log2_m(&self) -> u32 {
        self.m.trailing_zeros()
    }

    /// Time for `t` operations on one process: each walks `log n` nodes of
    /// which the top `log m` are cached.
    ///
    /// `t * (log m + r * (log n - log m))`
    pub fn analytic_sequential_cost(&self) -> f64 {
        self.t as f64 * self.sequential_op_cost()
    }

    fn sequential_op_cost(&self) -> f64 {
        let log_n = f64::from(self.log2_n());
        let log_m = f64::from(self.log2_m());
        log_m + self.r as f64 * (log_n - log_m)
    }

    /// Cost of one concurrent operation: a first try that loads the whole
    /// path uncached, then `p - 1` retries that each reload only the two
    /// expected freshly copied nodes.
    ///
    /// `r * log n + (p - 1) * (2r + log n - 2)`
    pub fn analytic_concurrent_op_cost(&self) -> f64 {
        let log_n = f64::from(self.log2_n());
        let r = self.r as f64;
        r * log_n + (self.p as f64 - 1.0) * (2.0 * r + log_n - 2.0)
    }

    /// Predicted speedup of `p` processes over the sequential execution;
    /// the operation count cancels.
    ///
    /// `p * (log m + r * (log n - log m)) / (r * log n + (p - 1) * (2r + log n - 2))`
    pub fn analytic_speedup(&self) -> Result<f64, ModelError> {
        if self.m == self.n {
            return Err(ModelError::CacheEqualsTree);
        }
        Ok(self.p as f64 * self.sequential_op_cost() / self.analytic_concurrent_op_cost())
    }
}

/// Expected number of freshly copied nodes on a random root-to-leaf path of
/// `depth` levels, when the copier's leaf was also uniformly random:
/// `sum_{k=1..depth} k / 2^k`, which approaches 2 from below.
pub fn expected_modified_on_path(depth: u32) -> Result<f64, ModelError> {
    if depth == 0 {
        return Err(ModelError::ZeroDepth);
    }
    let mut sum = 0.0f64;
    let mut weight = 1.0f64;
    for k in 1..=depth {
        weight *= 0.5;
        sum += f64::from(k) * weight;
    }
    Ok(sum)
}
