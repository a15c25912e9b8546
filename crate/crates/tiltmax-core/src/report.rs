//! Monte Carlo estimate reporting and the deterministic replicate runner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::stats::mean_and_stderr;

/// Point estimate with standard error, replicate count and a 95% CI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub stderr: f64,
    pub reps: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EstimatorReport {
    pub fn new(estimate: f64, stderr: f64, reps: usize) -> Self {
        Self {
            estimate,
            stderr,
            reps,
            ci_low: estimate - 1.96 * stderr,
            ci_high: estimate + 1.96 * stderr,
        }
    }

    /// Mean/stderr report from per-replicate values, aggregated in fixed
    /// order so the result is independent of thread count.
    pub fn from_values(values: &[f64]) -> Self {
        let (mean, se) = mean_and_stderr(values);
        Self::new(mean, se, values.len())
    }

    /// Agreement of two independent estimates within `k` combined stderr.
    pub fn agrees_with(&self, other: &EstimatorReport, k: f64) -> bool {
        let combined = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        (self.estimate - other.estimate).abs() <= k * combined
    }
}

/// Run `reps` replicates, each with its own `(seed, replicate_id)` stream.
///
/// Replicates execute in parallel; results come back indexed by replicate id,
/// so any downstream aggregation is deterministic at any thread count.
pub fn run_replicates<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> T + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(seed, rep);
            f(rep, &mut rng)
        })
        .collect()
}

/// Same as [`run_replicates`] but with replicate ids offset by `base`, for
/// estimators that must not share streams with a companion run.
pub fn run_replicates_offset<T, F>(seed: u64, base: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> T + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(seed, base + rep);
            f(rep, &mut rng)
        })
        .collect()
}
