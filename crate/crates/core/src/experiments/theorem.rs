//! Monte Carlo checks of the holistic-vs-segmented error comparison for two
//! evaluators, two perfectly correlated attributes and half the applicants
//! disadvantaged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bias::{draw_profiles, evaluate_plan, BiasParams, CoinMode};
use super::output::ExperimentResult;
use super::runner::{Executor, Summary};
use crate::allocation::{allocate_holistic, allocate_segmented};
use crate::distributions::PowerLaw;
use crate::error::{Error, Result};
use crate::population::{build_pool_split, true_best};
use crate::rng::{domain, Stream, StreamFactory};

/// `log 3 / log 2 - 1`: below it segmented allocation wins for large pools.
pub fn delta_threshold() -> f64 {
    3f64.ln() / 2f64.ln() - 1.0
}

/// `P(X_dis^max > 2 X_adv^max)` for one applicant per group.
pub fn pair_exceedance(delta: f64) -> f64 {
    2f64.powf(-(2.0 + delta))
}

/// Large-pool limit of `P(X_dis^max < 2 X_adv^max)`.
pub fn tail_approximation(delta: f64) -> f64 {
    1.0 / (1.0 + 2f64.powf(-(1.0 + delta)))
}

/// `err_hol - err_seg` as a function of the exceedance probability `p`.
pub fn predicted_difference(gamma: f64, p: f64) -> f64 {
    gamma * (1.0 - gamma) / 2.0 * (4.0 * p - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConfig {
    pub ns: Vec<usize>,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Bias factors for the `lambda = 0.5` ordering check; empty skips it.
    pub betas: Vec<f64>,
    pub sigma: f64,
    pub d: usize,
    pub runs: u64,
    pub oracle_draws: u64,
    pub tail_draws: u64,
    pub tail_group_sizes: Vec<usize>,
    pub tail_tolerance: f64,
    pub threshold_min_n: usize,
    pub threshold_margin: f64,
    pub seed: u64,
}

impl TheoremConfig {
    pub fn new(ns: Vec<usize>, deltas: Vec<f64>, gammas: Vec<f64>, runs: u64, seed: u64) -> Self {
        TheoremConfig {
            ns,
            deltas,
            gammas,
            betas: vec![0.0, 0.3, 0.7],
            sigma: 1.0,
            d: 2,
            runs,
            oracle_draws: 1_000_000,
            tail_draws: 10_000,
            tail_group_sizes: vec![10_000],
            tail_tolerance: 0.015,
            threshold_min_n: 500,
            threshold_margin: 0.25,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma != 1.0 {
            return Err(Error::param("sigma", format!("the comparison assumes sigma = 1, got {}", self.sigma)));
        }
        if self.d != 2 {
            return Err(Error::param("d", format!("the comparison assumes d = 2, got {}", self.d)));
        }
        if self.ns.is_empty() || self.deltas.is_empty() || self.gammas.is_empty() {
            return Err(Error::param("n", "need at least one n, delta and gamma"));
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 2 || n % 2 != 0) {
            return Err(Error::param("n", format!("must be even and at least 2, got {n}")));
        }
        for &delta in &self.deltas {
            PowerLaw::new(delta)?;
        }
        for &gamma in &self.gammas {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::param("gamma", format!("must lie in [0, 1], got {gamma}")));
            }
        }
        for &beta in &self.betas {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::param("beta", format!("must lie in [0, 1), got {beta}")));
            }
        }
        if self.tail_group_sizes.contains(&0) {
            return Err(Error::param("tail_group_sizes", "group sizes must be positive"));
        }
        for (name, v) in [("runs", self.runs), ("oracle_draws", self.oracle_draws), ("tail_draws", self.tail_draws)] {
            if v == 0 {
                return Err(Error::param(name, "must be positive"));
            }
        }
        Ok(())
    }

    fn params(&self, n: usize, delta: f64, gamma: f64, beta: f64, lambda: f64) -> BiasParams {
        BiasParams { n, d: self.d, sigma: self.sigma, alpha: 0.5, lambda, beta, gamma, delta, evaluators: 2 }
    }
}

// Columns of one theorem run.
const SEG: usize = 0;
const HOL: usize = 1;
const DIFF: usize = 2;
const DIS: usize = 3;
const SEG_DIS: usize = 4;
const HOL_DIS: usize = 5;
const ERR_ADV: usize = 6;
const DIS_R: usize = 7;
const HOL_DIS_R: usize = 8;

/// Errors of both schemes on one shared pool and coin realization, plus the
/// indicators needed to split them by the best applicant's group.
///
/// Columns: `err_seg, err_hol, err_hol - err_seg, 1{best dis},
/// err_seg 1{dis}, err_hol 1{dis}, (err_seg + err_hol) 1{adv},
/// 1{dis, one biased}, err_hol 1{dis, one biased}`.
pub fn theorem_run(params: &BiasParams, values_rng: &mut Stream, labels_rng: &mut Stream) -> Result<[f64; 9]> {
    let pool = build_pool_split(&params.pool_spec()?, values_rng, labels_rng)?;
    let profiles = draw_profiles(params, CoinMode::Independent, labels_rng)?;
    let holistic = allocate_holistic(params.n, params.d, params.evaluators, labels_rng)?;
    let segmented = allocate_segmented(params.n, params.d, params.evaluators, labels_rng)?;
    let hol = 1.0 - evaluate_plan(&holistic, &profiles, &pool)?;
    let seg = 1.0 - evaluate_plan(&segmented, &profiles, &pool)?;

    let dis = f64::from(u8::from(pool.is_disadvantaged(true_best(&pool))));
    let one_biased = profiles.iter().filter(|p| p.is_biased()).count() == 1;
    let dis_r = dis * f64::from(u8::from(one_biased));
    Ok([seg, hol, hol - seg, dis, seg * dis, hol * dis, (seg + hol) * (1.0 - dis), dis_r, hol * dis_r])
}

/// Estimates `P(X_dis^max > 2 X_adv^max)` with `m` i.i.d. draws per group.
pub fn tail_exceedance(m: usize, delta: f64, draws: u64, seed: u64, exec: &Executor) -> Result<Summary> {
    let law = PowerLaw::new(delta)?;
    let streams = StreamFactory::new(seed);
    let [p] = exec.monte_carlo(draws, |i| {
        let mut rng = streams.stream(domain::TAIL_ORACLE, i);
        let dis = law.sample_max(m, &mut rng)?;
        let adv = law.sample_max(m, &mut rng)?;
        Ok([f64::from(u8::from(dis > 2.0 * adv))])
    })?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingPoint {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub err_seg: Summary,
    pub err_hol: Summary,
    /// `err_hol - err_seg`, paired per run.
    pub difference: Summary,
}

impl OrderingPoint {
    /// `err_seg <= err_hol + 3 SE`.
    pub fn holds(&self) -> bool {
        self.difference.mean >= -3.0 * self.difference.std_error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaPoint {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub err_seg: Summary,
    pub err_hol: Summary,
    pub difference: Summary,
    /// Independent estimate of `P(X_dis^max > 2 X_adv^max)`.
    pub exceedance: Summary,
    /// Closed form of the difference, known for `n = 2`.
    pub exact: Option<f64>,
    pub decomposition: Decomposition,
}

impl FormulaPoint {
    pub fn predicted(&self) -> Summary {
        let scale = self.gamma * (1.0 - self.gamma) / 2.0;
        Summary {
            mean: predicted_difference(self.gamma, self.exceedance.mean),
            std_error: 4.0 * scale * self.exceedance.std_error,
            runs: self.exceedance.runs,
        }
    }

    pub fn agrees(&self) -> bool {
        let formula = self.difference.agrees_with(&self.predicted(), 3.0);
        let exact = self.exact.is_none_or(|e| (self.difference.mean - e).abs() <= 3.0 * self.difference.std_error);
        formula && exact
    }
}

/// Error split by the best applicant's group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// No error is ever made when the best applicant is advantaged.
    pub advantaged_error_free: bool,
    /// Unconditional error equals half the error given a disadvantaged best.
    pub half_rule: bool,
    /// Holistic error given a disadvantaged best and exactly one biased
    /// evaluator, with its standard error.
    pub holistic_given_one_biased: Option<(f64, f64)>,
}

impl Decomposition {
    fn from_columns(cols: &[Summary; 9]) -> Self {
        let p_dis = cols[DIS].mean;
        let half_rule = [(SEG, SEG_DIS), (HOL, HOL_DIS)].iter().all(|&(err, err_dis)| {
            if p_dis == 0.0 {
                return cols[err].mean == 0.0;
            }
            let half_cond = cols[err_dis].mean / (2.0 * p_dis);
            let se = cols[err].std_error.hypot(cols[err_dis].std_error / (2.0 * p_dis));
            (cols[err].mean - half_cond).abs() <= 3.0 * se
        });
        let count = cols[DIS_R].mean * cols[DIS_R].runs as f64;
        let holistic_given_one_biased = (count >= 1.0).then(|| {
            let p = cols[HOL_DIS_R].mean / cols[DIS_R].mean;
            (p, (p * (1.0 - p) / count).sqrt())
        });
        Decomposition {
            advantaged_error_free: cols[ERR_ADV].mean == 0.0,
            half_rule,
            holistic_given_one_biased,
        }
    }

    /// Holds when the conditional holistic error is within 3 SE of one half.
    pub fn one_biased_is_coin_flip(&self) -> bool {
        self.holistic_given_one_biased.is_none_or(|(p, se)| (p - 0.5).abs() <= 3.0 * se.max(1e-12))
    }

    pub fn holds(&self) -> bool {
        self.advantaged_error_free && self.half_rule && self.one_biased_is_coin_flip()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailPoint {
    pub group_size: usize,
    pub delta: f64,
    /// `P(X_dis^max < 2 X_adv^max)`.
    pub estimate: Summary,
    pub approximation: f64,
    pub tolerance: f64,
}

impl TailPoint {
    pub fn within(&self) -> bool {
        (self.estimate.mean - self.approximation).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPoint {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub difference: Summary,
}

impl ThresholdPoint {
    /// Segmented is expected to win below the threshold.
    pub fn segmented_expected_better(&self) -> bool {
        self.delta < delta_threshold()
    }

    /// The sign matches the expectation at 3 SE.
    pub fn significant(&self) -> bool {
        let margin = 3.0 * self.difference.std_error;
        if self.segmented_expected_better() {
            self.difference.mean > margin
        } else {
            self.difference.mean < -margin
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub ordering: Vec<OrderingPoint>,
    pub formula: Vec<FormulaPoint>,
    pub tail: Vec<TailPoint>,
    pub threshold: Vec<ThresholdPoint>,
    pub seed: u64,
}

impl TheoremReport {
    pub fn checks(&self) -> BTreeMap<String, bool> {
        let mut checks = BTreeMap::new();
        if !self.ordering.is_empty() {
            checks.insert("ordering".into(), self.ordering.iter().all(OrderingPoint::holds));
        }
        checks.insert("formula".into(), self.formula.iter().all(FormulaPoint::agrees));
        checks.insert("decomposition".into(), self.formula.iter().all(|f| f.decomposition.holds()));
        if !self.tail.is_empty() {
            checks.insert("tail_approximation".into(), self.tail.iter().all(TailPoint::within));
        }
        if !self.threshold.is_empty() {
            checks.insert("threshold".into(), self.threshold.iter().all(ThresholdPoint::significant));
        }
        checks
    }

    pub fn passed(&self) -> bool {
        self.checks().values().all(|&ok| ok)
    }

    pub fn ordering_rows(&self) -> Vec<ExperimentResult> {
        let mut rows = Vec::new();
        for p in &self.ordering {
            let coords = [("n", p.n as f64), ("delta", p.delta), ("gamma", p.gamma), ("beta", p.beta)];
            rows.push(ExperimentResult::new(&coords, "segmented", p.err_seg, self.seed));
            rows.push(ExperimentResult::new(&coords, "holistic", p.err_hol, self.seed));
            rows.push(ExperimentResult::new(&coords, "difference", p.difference, self.seed));
        }
        rows
    }

    pub fn formula_rows(&self) -> Vec<ExperimentResult> {
        let mut rows = Vec::new();
        for p in &self.formula {
            let coords = [("n", p.n as f64), ("delta", p.delta), ("gamma", p.gamma)];
            rows.push(ExperimentResult::new(&coords, "segmented", p.err_seg, self.seed));
            rows.push(ExperimentResult::new(&coords, "holistic", p.err_hol, self.seed));
            rows.push(ExperimentResult::new(&coords, "difference", p.difference, self.seed));
            rows.push(ExperimentResult::new(&coords, "formula", p.predicted(), self.seed));
            rows.push(ExperimentResult::new(&coords, "exceedance", p.exceedance, self.seed));
            if let Some(exact) = p.exact {
                let s = Summary { mean: exact, std_error: 0.0, runs: 1 };
                rows.push(ExperimentResult::new(&coords, "exact", s, self.seed));
            }
        }
        rows
    }

    pub fn tail_rows(&self) -> Vec<ExperimentResult> {
        let mut rows = Vec::new();
        for p in &self.tail {
            let coords = [("group_size", p.group_size as f64), ("delta", p.delta)];
            rows.push(ExperimentResult::new(&coords, "oracle", p.estimate, self.seed));
            let s = Summary { mean: p.approximation, std_error: 0.0, runs: 1 };
            rows.push(ExperimentResult::new(&coords, "approximation", s, self.seed));
        }
        rows
    }

    pub fn decomposition_rows(&self) -> Vec<ExperimentResult> {
        self.formula
            .iter()
            .filter_map(|p| {
                let (mean, std_error) = p.decomposition.holistic_given_one_biased?;
                let coords = [("n", p.n as f64), ("delta", p.delta), ("gamma", p.gamma)];
                let s = Summary { mean, std_error, runs: p.difference.runs };
                Some(ExperimentResult::new(&coords, "holistic_given_one_biased", s, self.seed))
            })
            .collect()
    }
}

fn simulate(cfg: &TheoremConfig, params: &BiasParams, exec: &Executor) -> Result<[Summary; 9]> {
    let streams = StreamFactory::new(cfg.seed);
    exec.monte_carlo(cfg.runs, |run| {
        let mut values_rng = streams.stream(domain::THEOREM, run);
        let mut labels_rng = streams.stream(domain::THEOREM_LABELS, run);
        theorem_run(params, &mut values_rng, &mut labels_rng)
    })
}

/// Ordering check with one protected attribute, over `ns x deltas x gammas x betas`.
pub fn run_ordering(cfg: &TheoremConfig, exec: &Executor) -> Result<Vec<OrderingPoint>> {
    cfg.validate()?;
    let mut ordering = Vec::new();
    for &n in &cfg.ns {
        for &delta in &cfg.deltas {
            for &gamma in &cfg.gammas {
                for &beta in &cfg.betas {
                    let cols = simulate(cfg, &cfg.params(n, delta, gamma, beta, 0.5), exec)?;
                    ordering.push(OrderingPoint {
                        n,
                        delta,
                        gamma,
                        beta,
                        err_seg: cols[SEG],
                        err_hol: cols[HOL],
                        difference: cols[DIFF],
                    });
                }
            }
        }
    }
    Ok(ordering)
}

/// Both attributes protected and `beta = 0`: the simulated difference set
/// against the group-maximum formula, over `ns x deltas x gammas`.
pub fn run_formula(cfg: &TheoremConfig, exec: &Executor) -> Result<Vec<FormulaPoint>> {
    cfg.validate()?;
    let mut formula = Vec::new();
    for &n in &cfg.ns {
        for &delta in &cfg.deltas {
            let exceedance = tail_exceedance(n / 2, delta, cfg.oracle_draws, cfg.seed, exec)?;
            for &gamma in &cfg.gammas {
                let cols = simulate(cfg, &cfg.params(n, delta, gamma, 0.0, 1.0), exec)?;
                formula.push(FormulaPoint {
                    n,
                    delta,
                    gamma,
                    err_seg: cols[SEG],
                    err_hol: cols[HOL],
                    difference: cols[DIFF],
                    exceedance,
                    exact: (n == 2).then(|| predicted_difference(gamma, pair_exceedance(delta))),
                    decomposition: Decomposition::from_columns(&cols),
                });
            }
        }
    }
    Ok(formula)
}

/// Formula points far enough from the threshold, and large enough, for the
/// sign of the difference to be asserted.
pub fn threshold_points(cfg: &TheoremConfig, formula: &[FormulaPoint]) -> Vec<ThresholdPoint> {
    formula
        .iter()
        .filter(|p| {
            p.n >= cfg.threshold_min_n
                && (p.delta - delta_threshold()).abs() >= cfg.threshold_margin
                && p.gamma > 0.0
                && p.gamma < 1.0
        })
        .map(|p| ThresholdPoint { n: p.n, delta: p.delta, gamma: p.gamma, difference: p.difference })
        .collect()
}

/// Large-pool check of `P(X_dis^max < 2 X_adv^max)` against its limit.
pub fn run_tail(cfg: &TheoremConfig, exec: &Executor) -> Result<Vec<TailPoint>> {
    cfg.validate()?;
    let mut tail = Vec::new();
    for &m in &cfg.tail_group_sizes {
        for &delta in &cfg.deltas {
            let p = tail_exceedance(m, delta, cfg.tail_draws, cfg.seed, exec)?;
            tail.push(TailPoint {
                group_size: m,
                delta,
                estimate: Summary { mean: 1.0 - p.mean, ..p },
                approximation: tail_approximation(delta),
                tolerance: cfg.tail_tolerance,
            });
        }
    }
    Ok(tail)
}

pub fn run_theorem_verify(cfg: &TheoremConfig, exec: &Executor) -> Result<TheoremReport> {
    let ordering = run_ordering(cfg, exec)?;
    let formula = run_formula(cfg, exec)?;
    let threshold = threshold_points(cfg, &formula);
    let tail = run_tail(cfg, exec)?;
    Ok(TheoremReport { ordering, formula, tail, threshold, seed: cfg.seed })
}
