//! Holistic vs segmented allocation with one biased evaluator, over a grid
//! of two varying parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::output::ExperimentResult;
use super::runner::{Executor, Summary};
use crate::allocation::{allocate_holistic, allocate_segmented, AllocationPlan};
use crate::distributions::Marginal;
use crate::error::{Error, Result};
use crate::evaluators::{draw_bias_coin, EvaluatorProfile, ScoreMatrix};
use crate::metrics::top1_accuracy;
use crate::population::{build_pool_split, AttributeMatrix, PoolSpec};
use crate::rng::{domain, Stream, StreamFactory};

/// A named model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    N,
    D,
    Sigma,
    Alpha,
    Lambda,
    Beta,
    Gamma,
    Delta,
    Tau,
    Evaluators,
    Scheme,
}

impl Param {
    pub const ALL: [Param; 11] = [
        Param::N,
        Param::D,
        Param::Sigma,
        Param::Alpha,
        Param::Lambda,
        Param::Beta,
        Param::Gamma,
        Param::Delta,
        Param::Tau,
        Param::Evaluators,
        Param::Scheme,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Param::N => "n",
            Param::D => "d",
            Param::Sigma => "sigma",
            Param::Alpha => "alpha",
            Param::Lambda => "lambda",
            Param::Beta => "beta",
            Param::Gamma => "gamma",
            Param::Delta => "delta",
            Param::Tau => "tau",
            Param::Evaluators => "evaluators",
            Param::Scheme => "scheme",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("axis", format!("unknown parameter `{s}`")))
    }
}

/// One varying parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: Param, values: Vec<f64>) -> Self {
        Axis { param, values }
    }
}

/// Model parameters of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasParams {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub evaluators: usize,
}

impl Default for BiasParams {
    fn default() -> Self {
        BiasParams {
            n: 20,
            d: 20,
            sigma: 0.5,
            alpha: 0.5,
            lambda: 1.0,
            beta: 0.0,
            gamma: 0.5,
            delta: 1.0,
            evaluators: 2,
        }
    }
}

fn as_count(param: Param, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::param(param.name(), format!("must be a positive integer, got {v}")))
    }
}

impl BiasParams {
    pub fn set(&mut self, param: Param, v: f64) -> Result<()> {
        match param {
            Param::N => self.n = as_count(param, v)?,
            Param::D => self.d = as_count(param, v)?,
            Param::Evaluators => self.evaluators = as_count(param, v)?,
            Param::Sigma => self.sigma = v,
            Param::Alpha => self.alpha = v,
            Param::Lambda => self.lambda = v,
            Param::Beta => self.beta = v,
            Param::Gamma => self.gamma = v,
            Param::Delta => self.delta = v,
            Param::Tau | Param::Scheme => {
                return Err(Error::param("axis", format!("`{param}` is not a model parameter of the bias grid")))
            }
        }
        Ok(())
    }

    pub fn pool_spec(&self) -> Result<PoolSpec> {
        let spec = PoolSpec {
            n: self.n,
            d: self.d,
            sigma: self.sigma,
            alpha: self.alpha,
            lambda: self.lambda,
            marginal: Marginal::power_law(self.delta)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.pool_spec()?;
        EvaluatorProfile::biased(self.beta, true)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("must lie in [0, 1], got {}", self.gamma)));
        }
        for (name, size) in [("n", self.n), ("d", self.d)] {
            if size % self.evaluators != 0 {
                return Err(Error::param(
                    "evaluators",
                    format!("{} evaluators cannot split {name} = {size} evenly", self.evaluators),
                ));
            }
        }
        Ok(())
    }
}

/// How evaluators' bias coins are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinMode {
    /// Exactly one biased evaluator; `gamma` is ignored.
    OneBiased,
    /// Each evaluator is biased independently with probability `gamma`.
    Independent,
}

impl FromStr for CoinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_biased" => Ok(CoinMode::OneBiased),
            "independent" => Ok(CoinMode::Independent),
            _ => Err(Error::param("coins", format!("expected one_biased or independent, got `{s}`"))),
        }
    }
}

/// Realizes the evaluators' coins.
pub fn draw_profiles(params: &BiasParams, coins: CoinMode, rng: &mut Stream) -> Result<Vec<EvaluatorProfile>> {
    (0..params.evaluators)
        .map(|e| {
            let biased = match coins {
                CoinMode::OneBiased => e == 0,
                CoinMode::Independent => draw_bias_coin(params.gamma, rng)?,
            };
            EvaluatorProfile::biased(params.beta, biased)
        })
        .collect()
}

/// Top-1 accuracy when `profiles[e]` scores `plan.block(e)`.
pub fn evaluate_plan(plan: &AllocationPlan, profiles: &[EvaluatorProfile], pool: &AttributeMatrix) -> Result<f64> {
    let mut scores = ScoreMatrix::new(pool.n(), pool.d());
    for (block, profile) in plan.blocks().iter().zip(profiles) {
        profile.report(block, pool, &mut scores)?;
    }
    top1_accuracy(&scores, pool)
}

/// One run: a single pool and coin realization scored under both schemes.
///
/// Returns `[segmented, holistic, segmented - holistic]` accuracies.
pub fn simulate_bias_run(
    params: &BiasParams,
    coins: CoinMode,
    values_rng: &mut Stream,
    labels_rng: &mut Stream,
) -> Result<[f64; 3]> {
    let pool = build_pool_split(&params.pool_spec()?, values_rng, labels_rng)?;
    let profiles = draw_profiles(params, coins, labels_rng)?;
    let holistic = allocate_holistic(params.n, params.d, params.evaluators, labels_rng)?;
    let segmented = allocate_segmented(params.n, params.d, params.evaluators, labels_rng)?;
    let hol = evaluate_plan(&holistic, &profiles, &pool)?;
    let seg = evaluate_plan(&segmented, &profiles, &pool)?;
    Ok([seg, hol, seg - hol])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub fixed: BiasParams,
    pub runs: u64,
    pub coins: CoinMode,
    /// Demand exactly two axes, one of them `delta`.
    pub require_delta_axis: bool,
}

impl GridSpec {
    /// `delta` in 0.1..=2.0 against `sigma` in {0, 0.25, 0.5, 0.75, 1}.
    pub fn standard(runs: u64) -> Self {
        GridSpec {
            axes: vec![
                Axis::new(Param::Delta, (1..=20).map(|k| k as f64 / 10.0).collect()),
                Axis::new(Param::Sigma, vec![0.0, 0.25, 0.5, 0.75, 1.0]),
            ],
            fixed: BiasParams::default(),
            runs,
            coins: CoinMode::OneBiased,
            require_delta_axis: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::param("axes", "need at least one axis"));
        }
        for (k, axis) in self.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(Error::param("axes", format!("axis `{}` has no values", axis.param)));
            }
            if self.axes[..k].iter().any(|a| a.param == axis.param) {
                return Err(Error::param("axes", format!("axis `{}` given twice", axis.param)));
            }
        }
        if self.require_delta_axis
            && (self.axes.len() != 2 || !self.axes.iter().any(|a| a.param == Param::Delta))
        {
            return Err(Error::param("axes", "expected two axes, one of them delta"));
        }
        for point in self.points() {
            self.params_at(&point)?.validate()?;
        }
        Ok(())
    }

    /// Grid points in row-major order, the first axis varying slowest.
    pub fn points(&self) -> Vec<Vec<(Param, f64)>> {
        self.axes.iter().fold(vec![Vec::new()], |acc, axis| {
            acc.into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((axis.param, v));
                        p
                    })
                })
                .collect()
        })
    }

    pub fn params_at(&self, point: &[(Param, f64)]) -> Result<BiasParams> {
        let mut params = self.fixed;
        for &(param, v) in point {
            params.set(param, v)?;
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasPoint {
    pub coords: Vec<(Param, f64)>,
    pub segmented: Summary,
    pub holistic: Summary,
    pub difference: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasGridReport {
    pub points: Vec<BiasPoint>,
    pub seed: u64,
}

impl BiasGridReport {
    /// Three rows per point: segmented, holistic and their difference.
    pub fn rows(&self) -> Vec<ExperimentResult> {
        let mut rows = Vec::with_capacity(3 * self.points.len());
        for p in &self.points {
            let coords: Vec<(&str, f64)> = p.coords.iter().map(|(k, v)| (k.name(), *v)).collect();
            rows.push(ExperimentResult::new(&coords, "segmented", p.segmented, self.seed));
            rows.push(ExperimentResult::new(&coords, "holistic", p.holistic, self.seed));
            rows.push(ExperimentResult::new(&coords, "difference", p.difference, self.seed));
        }
        rows
    }

    pub fn point(&self, coords: &[(Param, f64)]) -> Option<&BiasPoint> {
        self.points.iter().find(|p| p.coords == coords)
    }
}

/// Runs every grid point on the same per-run streams, so neighboring points
/// differ only through the parameters.
pub fn run_bias_grid(grid: &GridSpec, seed: u64, exec: &Executor) -> Result<BiasGridReport> {
    grid.validate()?;
    let streams = StreamFactory::new(seed);
    let mut points = Vec::new();
    for coords in grid.points() {
        let params = grid.params_at(&coords)?;
        let [segmented, holistic, difference] = exec.monte_carlo(grid.runs, |run| {
            let mut values_rng = streams.stream(domain::BIAS_GRID, run);
            let mut labels_rng = streams.stream(domain::BIAS_LABELS, run);
            simulate_bias_run(&params, grid.coins, &mut values_rng, &mut labels_rng)
        })?;
        points.push(BiasPoint { coords, segmented, holistic, difference });
    }
    Ok(BiasGridReport { points, seed })
}
