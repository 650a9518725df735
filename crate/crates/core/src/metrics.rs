//! Selection accuracy and calibration error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluators::ScoreMatrix;
use crate::population::{true_best, AttributeMatrix};

/// A percentile bin in `1..=num_bins`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinLabel(u32);

impl BinLabel {
    pub fn new(value: u32, num_bins: u32) -> Result<Self> {
        if value == 0 || value > num_bins {
            return Err(Error::param("bin", format!("{value} outside 1..={num_bins}")));
        }
        Ok(BinLabel(value))
    }

    pub fn value(&self) -> u32 {
        self.0
    }
}

/// Maps a percentile to its bin: `(k-1)/B < p <= k/B` gives `k`, and `p = 0` gives 1.
pub fn percentile_bin(p: f64, num_bins: u32) -> Result<BinLabel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("percentile must lie in [0, 1], got {p}")));
    }
    if num_bins == 0 {
        return Err(Error::param("num_bins", "must be positive"));
    }
    let k = (num_bins as f64 * p).ceil() as u32;
    BinLabel::new(k.clamp(1, num_bins), num_bins)
}

/// Top-1 accuracy of the estimated ranking, tie-adjusted.
///
/// Only applicants with every attribute scored are eligible. With `T` the set
/// tied at the maximum total, returns `1/|T|` when the true best is in `T`
/// and 0 otherwise, including when the true best was screened out.
pub fn top1_accuracy(scores: &ScoreMatrix, pool: &AttributeMatrix) -> Result<f64> {
    if scores.n() != pool.n() || scores.d() != pool.d() {
        return Err(Error::param("scores", "shape does not match the pool"));
    }
    let mut best_total = f64::NEG_INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    for i in 0..scores.n() {
        let Some(total) = scores.row_total(i) else { continue };
        if total > best_total {
            best_total = total;
            tied.clear();
            tied.push(i);
        } else if total == best_total {
            tied.push(i);
        }
    }
    if tied.is_empty() {
        return Err(Error::NothingEvaluated);
    }
    let best = true_best(pool);
    Ok(if tied.contains(&best) { 1.0 / tied.len() as f64 } else { 0.0 })
}

/// Mean of `|bin(p_i) - reported_i|` over applicants.
pub fn mean_bin_error(reported: &[BinLabel], percentiles: &[f64], num_bins: u32) -> Result<f64> {
    if reported.len() != percentiles.len() {
        return Err(Error::param(
            "reported",
            format!("{} bins for {} percentiles", reported.len(), percentiles.len()),
        ));
    }
    if reported.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0u64;
    for (b, &p) in reported.iter().zip(percentiles) {
        let truth = percentile_bin(p, num_bins)?;
        total += truth.value().abs_diff(b.value()) as u64;
    }
    Ok(total as f64 / reported.len() as f64)
}
