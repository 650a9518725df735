//! Adaptive screening under holistic allocation: accuracy and work as the
//! screened fraction `tau` shrinks.

use serde::{Deserialize, Serialize};

use super::output::ExperimentResult;
use super::runner::{Executor, Summary};
use crate::allocation::allocate_holistic;
use crate::distributions::Marginal;
use crate::error::{Error, Result};
use crate::evaluators::{EvaluatorProfile, ScoreMatrix};
use crate::metrics::top1_accuracy;
use crate::population::{build_pool, PoolSpec};
use crate::rng::{domain, Stream, StreamFactory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub taus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub n: usize,
    pub delta: f64,
    pub evaluators: usize,
    pub runs: u64,
    pub seed: u64,
}

impl EfficiencyConfig {
    /// Two evaluators, 200 applicants, power law with `delta = 1`.
    pub fn standard(taus: Vec<f64>, sigmas: Vec<f64>, runs: u64, seed: u64) -> Self {
        EfficiencyConfig { taus, sigmas, n: 200, delta: 1.0, evaluators: 2, runs, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.sigmas.is_empty() {
            return Err(Error::param("tau", "need at least one tau and one sigma"));
        }
        if let Some(t) = self.taus.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::param("tau", format!("must lie in (0, 1], got {t}")));
        }
        if let Some(s) = self.sigmas.iter().find(|&&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::param("sigma", format!("must lie in [0, 1], got {s}")));
        }
        Marginal::power_law(self.delta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyPoint {
    pub tau: f64,
    pub sigma: f64,
    pub accuracy: Summary,
    pub cells_evaluated: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub points: Vec<EfficiencyPoint>,
    pub seed: u64,
}

impl EfficiencyReport {
    pub fn accuracy_rows(&self) -> Vec<ExperimentResult> {
        self.points
            .iter()
            .map(|p| ExperimentResult::new(&[("tau", p.tau), ("sigma", p.sigma)], "holistic", p.accuracy, self.seed))
            .collect()
    }

    pub fn work_rows(&self) -> Vec<ExperimentResult> {
        self.points
            .iter()
            .map(|p| {
                ExperimentResult::new(&[("tau", p.tau), ("sigma", p.sigma)], "holistic", p.cells_evaluated, self.seed)
            })
            .collect()
    }

    pub fn point(&self, tau: f64, sigma: f64) -> Option<&EfficiencyPoint> {
        self.points.iter().find(|p| p.tau == tau && p.sigma == sigma)
    }
}

/// One screened holistic evaluation; returns (top-1 accuracy, cells evaluated).
pub fn screening_run(n: usize, sigma: f64, tau: f64, evaluators: usize, marginal: &Marginal, rng: &mut Stream) -> Result<(f64, usize)> {
    let spec = PoolSpec { n, d: 2, sigma, alpha: 0.0, lambda: 0.0, marginal: *marginal };
    let pool = build_pool(&spec, rng)?;
    let plan = allocate_holistic(n, 2, evaluators, rng)?;
    let screener = EvaluatorProfile::screener(tau)?;
    let mut scores = ScoreMatrix::new(n, 2);
    for block in plan.blocks() {
        screener.report(block, &pool, &mut scores)?;
    }
    Ok((top1_accuracy(&scores, &pool)?, scores.evaluated_count()))
}

pub fn run_efficiency_sweep(cfg: &EfficiencyConfig, exec: &Executor) -> Result<EfficiencyReport> {
    cfg.validate()?;
    let marginal = Marginal::power_law(cfg.delta)?;
    let streams = StreamFactory::new(cfg.seed);
    let mut points = Vec::new();
    for &tau in &cfg.taus {
        for &sigma in &cfg.sigmas {
            let [accuracy, cells_evaluated] = exec.monte_carlo(cfg.runs, |run| {
                let mut rng = streams.stream(domain::EFFICIENCY, run);
                let (acc, cells) = screening_run(cfg.n, sigma, tau, cfg.evaluators, &marginal, &mut rng)?;
                Ok([acc, cells as f64])
            })?;
            points.push(EfficiencyPoint { tau, sigma, accuracy, cells_evaluated });
        }
    }
    Ok(EfficiencyReport { points, seed: cfg.seed })
}
