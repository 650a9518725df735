//! Parallel Monte Carlo with scheduling-independent results.
//!
//! Runs are cut into fixed-size chunks. Each chunk accumulates its moments
//! sequentially, and chunk moments are merged in chunk order, so the floating
//! point reduction tree is the same for every worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHUNK: u64 = 1024;

/// Mean and Monte Carlo standard error of one per-run quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(runs)`.
    pub std_error: f64,
    pub runs: u64,
}

impl Summary {
    /// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with(&self, other: &Summary, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.std_error.hypot(other.std_error)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / total as f64);
        self.count = total;
    }

    fn summary(&self) -> Summary {
        let var = if self.count > 1 { self.m2 / (self.count - 1) as f64 } else { 0.0 };
        Summary {
            mean: self.mean,
            std_error: (var.max(0.0) / self.count as f64).sqrt(),
            runs: self.count,
        }
    }
}

/// A worker pool of fixed size.
pub struct Executor {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::param("workers", "need at least one worker"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::param("workers", e.to_string()))?;
        Ok(Executor { pool, workers })
    }

    /// One worker per available core.
    pub fn with_available_parallelism() -> Result<Self> {
        let n = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        Self::new(n)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `run(i)` for `i in 0..runs` and summarizes each of the `K`
    /// returned quantities.
    pub fn monte_carlo<const K: usize, F>(&self, runs: u64, run: F) -> Result<[Summary; K]>
    where
        F: Fn(u64) -> Result<[f64; K]> + Sync,
    {
        if runs == 0 {
            return Err(Error::param("runs", "need at least one run"));
        }
        let chunks = runs.div_ceil(CHUNK);
        let partials: Vec<[Moments; K]> = self.pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut acc = [Moments::default(); K];
                    for i in c * CHUNK..((c + 1) * CHUNK).min(runs) {
                        let values = run(i)?;
                        for (m, v) in acc.iter_mut().zip(values) {
                            m.push(v);
                        }
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut total = [Moments::default(); K];
        for part in &partials {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        Ok(total.map(|m| m.summary()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_two_pass() {
        let exec = Executor::new(2).unwrap();
        let f = |i: u64| Ok([(i as f64 * 0.37).sin(), (i % 7) as f64]);
        let [a, b] = exec.monte_carlo(5000, f).unwrap();
        let xs: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.37).sin()).collect();
        let mean = xs.iter().sum::<f64>() / 5000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4999.0;
        assert!((a.mean - mean).abs() < 1e-12);
        assert!((a.std_error - (var / 5000.0).sqrt()).abs() < 1e-12);
        assert_eq!(a.runs, 5000);
        assert!((b.mean - (0..5000).map(|i| (i % 7) as f64).sum::<f64>() / 5000.0).abs() < 1e-12);
    }

    #[test]
    fn identical_across_worker_counts() {
        let f = |i: u64| Ok([((i * 2654435761) % 1000) as f64 / 7.0]);
        let one = Executor::new(1).unwrap().monte_carlo(10_000, f).unwrap();
        let four = Executor::new(4).unwrap().monte_carlo(10_000, f).unwrap();
        assert_eq!(one[0].mean.to_bits(), four[0].mean.to_bits());
        assert_eq!(one[0].std_error.to_bits(), four[0].std_error.to_bits());
    }

    #[test]
    fn single_run_has_zero_error() {
        let [s] = Executor::new(1).unwrap().monte_carlo(1, |_| Ok([3.0])).unwrap();
        assert_eq!((s.mean, s.std_error, s.runs), (3.0, 0.0, 1));
    }

    #[test]
    fn errors_propagate() {
        let r = Executor::new(1).unwrap().monte_carlo(10, |i| {
            if i == 5 {
                Err(Error::NothingEvaluated)
            } else {
                Ok([0.0])
            }
        });
        assert!(r.is_err());
        assert!(Executor::new(0).is_err());
    }
}
