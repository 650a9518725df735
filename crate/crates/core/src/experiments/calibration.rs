//! Calibration error of a single quantile-binning evaluator versus the number
//! of applicants it sees.

use serde::{Deserialize, Serialize};

use super::output::ExperimentResult;
use super::runner::{Executor, Summary};
use crate::allocation::Block;
use crate::distributions::Marginal;
use crate::error::{Error, Result};
use crate::evaluators::report_quantile_binned;
use crate::metrics::{mean_bin_error, BinLabel};
use crate::population::{build_pool, PoolSpec};
use crate::rng::{domain, StreamFactory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub ns: Vec<usize>,
    pub num_bins: u32,
    pub runs: u64,
    pub marginal: Marginal,
    pub seed: u64,
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() {
            return Err(Error::param("n", "need at least one pool size"));
        }
        if self.num_bins < 2 {
            return Err(Error::param("num_bins", "need at least 2 bins"));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < self.num_bins as usize) {
            return Err(Error::param("n", format!("{n} is smaller than num_bins = {}", self.num_bins)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub results: Vec<ExperimentResult>,
    /// Least-squares slope of `ln(error)` against `ln(n)`.
    pub loglog_slope: f64,
    pub strictly_decreasing: bool,
}

/// Mean absolute bin error of one binner over `n` fresh applicants.
pub fn calibration_error(n: usize, num_bins: u32, marginal: &Marginal, rng: &mut crate::rng::Stream) -> Result<f64> {
    let spec = PoolSpec { n, d: 1, sigma: 0.0, alpha: 0.0, lambda: 0.0, marginal: *marginal };
    let pool = build_pool(&spec, rng)?;
    let block = Block { rows: (0..n).collect(), cols: vec![0] };
    let reported = report_quantile_binned(&block, &pool, num_bins)?;
    let (bins, percentiles): (Vec<BinLabel>, Vec<f64>) = reported
        .iter()
        .map(|&(i, b)| (b, marginal.cdf(pool.value(i, 0))))
        .unzip();
    mean_bin_error(&bins, &percentiles, num_bins)
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run_calibration_sweep(cfg: &CalibrationConfig, exec: &Executor) -> Result<CalibrationReport> {
    cfg.validate()?;
    let streams = StreamFactory::new(cfg.seed);
    let mut results = Vec::with_capacity(cfg.ns.len());
    let mut summaries: Vec<Summary> = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let [s] = exec.monte_carlo(cfg.runs, |run| {
            let mut rng = streams.stream(domain::CALIBRATION, run);
            Ok([calibration_error(n, cfg.num_bins, &cfg.marginal, &mut rng)?])
        })?;
        results.push(ExperimentResult::new(&[("n", n as f64)], "quantile_binner", s, cfg.seed));
        summaries.push(s);
    }
    let xs: Vec<f64> = cfg.ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
    let strictly_decreasing = ys.windows(2).all(|w| w[1] < w[0]);
    let loglog_slope = if xs.len() >= 2 { loglog_slope(&xs, &ys) } else { f64::NAN };
    Ok(CalibrationReport { results, loglog_slope, strictly_decreasing })
}
