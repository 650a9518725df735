//! Behavioral models turning true values into reported scores.

use ndarray::Array2;
use rand::Rng;

use crate::allocation::Block;
use crate::error::{Error, Result};
use crate::metrics::BinLabel;
use crate::population::AttributeMatrix;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvaluatorKind {
    Truthful,
    QuantileBinner { num_bins: u32 },
    Biased { beta: f64 },
    Screener { tau: f64 },
}

/// One evaluator's model plus the realized bias coin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluatorProfile {
    kind: EvaluatorKind,
    is_biased: bool,
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::param("beta", format!("must lie in [0, 1), got {beta}")))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("tau", format!("must lie in (0, 1], got {tau}")))
    }
}

impl EvaluatorProfile {
    pub fn truthful() -> Self {
        EvaluatorProfile { kind: EvaluatorKind::Truthful, is_biased: false }
    }

    pub fn quantile_binner(num_bins: u32) -> Result<Self> {
        if num_bins < 2 {
            return Err(Error::param("num_bins", format!("need at least 2 bins, got {num_bins}")));
        }
        Ok(EvaluatorProfile { kind: EvaluatorKind::QuantileBinner { num_bins }, is_biased: false })
    }

    /// A bias-prone evaluator whose coin has already been realized.
    pub fn biased(beta: f64, is_biased: bool) -> Result<Self> {
        check_beta(beta)?;
        Ok(EvaluatorProfile { kind: EvaluatorKind::Biased { beta }, is_biased })
    }

    /// A bias-prone evaluator that turns out biased with probability `gamma`.
    pub fn with_bias_coin(beta: f64, gamma: f64, rng: &mut Stream) -> Result<Self> {
        let coin = draw_bias_coin(gamma, rng)?;
        Self::biased(beta, coin)
    }

    pub fn screener(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(EvaluatorProfile { kind: EvaluatorKind::Screener { tau }, is_biased: false })
    }

    pub fn kind(&self) -> EvaluatorKind {
        self.kind
    }

    pub fn is_biased(&self) -> bool {
        self.is_biased
    }

    /// Scores the owned block into `out`. Quantile binners report bins, not
    /// scores, and are rejected here.
    pub fn report(&self, block: &Block, pool: &AttributeMatrix, out: &mut ScoreMatrix) -> Result<()> {
        match self.kind {
            EvaluatorKind::Truthful => write_truthful(block, pool, out),
            EvaluatorKind::Biased { beta } if self.is_biased => write_biased(block, pool, beta, out),
            EvaluatorKind::Biased { .. } => write_truthful(block, pool, out),
            EvaluatorKind::Screener { tau } => write_screened(block, pool, tau, out),
            EvaluatorKind::QuantileBinner { .. } => Err(Error::UnsupportedOwnership(
                "quantile binners report bins; use report_quantile_binned".into(),
            )),
        }
    }
}

/// Realizes one evaluator's bias coin.
pub fn draw_bias_coin(gamma: f64, rng: &mut Stream) -> Result<bool> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::param("gamma", format!("must lie in [0, 1], got {gamma}")));
    }
    Ok(rng.random::<f64>() < gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    /// Not owned by any evaluator that has reported yet.
    Unassigned,
    /// Owned, but skipped by a screener.
    Skipped,
    Scored(f64),
}

/// Reported scores `y_ij`, with skipped cells kept distinct from scored ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    cells: Array2<Cell>,
}

impl ScoreMatrix {
    pub fn new(n: usize, d: usize) -> Self {
        ScoreMatrix { cells: Array2::from_elem((n, d), Cell::Unassigned) }
    }

    /// Wraps explicit cells, e.g. scores gathered outside the simulator.
    pub fn from_cells(cells: Array2<Cell>) -> Self {
        ScoreMatrix { cells }
    }

    pub fn n(&self) -> usize {
        self.cells.nrows()
    }

    pub fn d(&self) -> usize {
        self.cells.ncols()
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[[i, j]]
    }

    pub fn score(&self, i: usize, j: usize) -> Option<f64> {
        match self.cells[[i, j]] {
            Cell::Scored(y) => Some(y),
            _ => None,
        }
    }

    pub fn is_evaluated(&self, i: usize, j: usize) -> bool {
        matches!(self.cells[[i, j]], Cell::Scored(_))
    }

    /// Evaluated mask.
    pub fn mask(&self) -> Array2<bool> {
        self.cells.map(|c| matches!(c, Cell::Scored(_)))
    }

    pub fn evaluated_count(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, Cell::Scored(_))).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| *c != Cell::Unassigned)
    }

    /// Sum of scores of applicant `i`, if every attribute was scored.
    pub fn row_total(&self, i: usize) -> Option<f64> {
        let mut total = 0.0;
        for c in self.cells.row(i) {
            match c {
                Cell::Scored(y) => total += y,
                _ => return None,
            }
        }
        Some(total)
    }

    fn claim(&mut self, i: usize, j: usize, cell: Cell) -> Result<()> {
        let slot = self
            .cells
            .get_mut([i, j])
            .ok_or_else(|| Error::UnsupportedOwnership(format!("cell ({i}, {j}) outside the pool")))?;
        if *slot != Cell::Unassigned {
            return Err(Error::OverlappingCells { row: i, col: j });
        }
        *slot = cell;
        Ok(())
    }

    /// Folds another partial matrix in; fails if both own a cell.
    pub fn merge(&mut self, other: &ScoreMatrix) -> Result<()> {
        if self.cells.dim() != other.cells.dim() {
            return Err(Error::param("scores", "shape mismatch in merge"));
        }
        for ((i, j), &c) in other.cells.indexed_iter() {
            if c != Cell::Unassigned {
                self.claim(i, j, c)?;
            }
        }
        Ok(())
    }
}

fn write_truthful(block: &Block, pool: &AttributeMatrix, out: &mut ScoreMatrix) -> Result<()> {
    for (i, j) in block.cells() {
        out.claim(i, j, Cell::Scored(pool.value(i, j)))?;
    }
    Ok(())
}

fn write_biased(block: &Block, pool: &AttributeMatrix, beta: f64, out: &mut ScoreMatrix) -> Result<()> {
    check_beta(beta)?;
    for (i, j) in block.cells() {
        let x = pool.value(i, j);
        let y = if pool.is_protected(j) && pool.is_disadvantaged(i) { beta * x } else { x };
        out.claim(i, j, Cell::Scored(y))?;
    }
    Ok(())
}

/// `ceil(tau m)`, clamped to `[1, m]`.
pub fn screened_count(tau: f64, m: usize) -> usize {
    // absorb representation error such as 0.1 * 30 = 3.0000000000000004
    let raw = (tau * m as f64 * (1.0 - 1e-12)).ceil() as usize;
    raw.clamp(1, m)
}

fn write_screened(block: &Block, pool: &AttributeMatrix, tau: f64, out: &mut ScoreMatrix) -> Result<()> {
    check_tau(tau)?;
    if block.cols.len() != 2 {
        return Err(Error::UnsupportedOwnership(format!(
            "screener needs both attributes of its applicants, got {} columns",
            block.cols.len()
        )));
    }
    let mut cols = block.cols.clone();
    cols.sort_unstable();
    let (first, second) = (cols[0], cols[1]);

    let mut order = block.rows.clone();
    order.sort_by(|&a, &b| pool.value(b, first).total_cmp(&pool.value(a, first)).then(a.cmp(&b)));
    let keep = screened_count(tau, order.len());

    for &i in &block.rows {
        out.claim(i, first, Cell::Scored(pool.value(i, first)))?;
    }
    for (rank, &i) in order.iter().enumerate() {
        let cell = if rank < keep { Cell::Scored(pool.value(i, second)) } else { Cell::Skipped };
        out.claim(i, second, cell)?;
    }
    Ok(())
}

/// `y_ij = x_ij` on every owned cell.
pub fn report_truthful(block: &Block, pool: &AttributeMatrix) -> Result<ScoreMatrix> {
    let mut out = ScoreMatrix::new(pool.n(), pool.d());
    write_truthful(block, pool, &mut out)?;
    Ok(out)
}

/// Discounts protected attributes of disadvantaged applicants by `beta`.
pub fn report_biased(block: &Block, pool: &AttributeMatrix, beta: f64) -> Result<ScoreMatrix> {
    let mut out = ScoreMatrix::new(pool.n(), pool.d());
    write_biased(block, pool, beta, &mut out)?;
    Ok(out)
}

/// Attribute one for all owned applicants, attribute two only for the top
/// `ceil(tau m)` of them by attribute one (ties to the lower index).
pub fn report_screened(block: &Block, pool: &AttributeMatrix, tau: f64) -> Result<ScoreMatrix> {
    let mut out = ScoreMatrix::new(pool.n(), pool.d());
    write_screened(block, pool, tau, &mut out)?;
    Ok(out)
}

/// Bins the owned applicants by their rank within the block: the applicant
/// of 1-based rank `r` among `m` gets bin `ceil(num_bins r / m)`.
///
/// Returns `(applicant, bin)` in the block's row order.
pub fn report_quantile_binned(
    block: &Block,
    pool: &AttributeMatrix,
    num_bins: u32,
) -> Result<Vec<(usize, BinLabel)>> {
    if num_bins < 2 {
        return Err(Error::param("num_bins", format!("need at least 2 bins, got {num_bins}")));
    }
    if block.cols.len() != 1 {
        return Err(Error::UnsupportedOwnership(format!(
            "quantile binner is defined for a single attribute, got {}",
            block.cols.len()
        )));
    }
    let m = block.rows.len();
    if m == 0 {
        return Err(Error::param("block", "no applicants to bin"));
    }
    let j = block.cols[0];
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        pool.value(block.rows[a], j)
            .total_cmp(&pool.value(block.rows[b], j))
            .then(block.rows[a].cmp(&block.rows[b]))
    });
    let mut bins = vec![BinLabel::new(1, num_bins)?; m];
    for (rank0, &pos) in order.iter().enumerate() {
        let r = rank0 as u64 + 1;
        let bin = (num_bins as u64 * r).div_ceil(m as u64) as u32;
        bins[pos] = BinLabel::new(bin, num_bins)?;
    }
    Ok(block.rows.iter().copied().zip(bins).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{allocate_holistic, allocate_segmented};
    use crate::distributions::Marginal;
    use crate::population::{build_pool, Group, PoolSpec};
    use crate::rng::StreamFactory;
    use ndarray::array;
    use proptest::prelude::*;

    fn rng(i: u64) -> Stream {
        StreamFactory::new(3).stream(60, i)
    }

    fn pool_2x2() -> AttributeMatrix {
        AttributeMatrix::new(
            array![[7.3, 2.0], [7.3, 2.0 + 1e-9]],
            vec![Group::Disadvantaged, Group::Advantaged],
            vec![true, false],
        )
        .unwrap()
    }

    fn full(pool: &AttributeMatrix) -> Block {
        Block { rows: (0..pool.n()).collect(), cols: (0..pool.d()).collect() }
    }

    fn single_column_pool(values: &[f64]) -> AttributeMatrix {
        let col = ndarray::Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        AttributeMatrix::new(col, vec![Group::Advantaged; values.len()], vec![false]).unwrap()
    }

    #[test]
    fn truthful_copies_values() {
        let spec = PoolSpec {
            n: 20, d: 20, sigma: 0.5, alpha: 0.5, lambda: 1.0,
            marginal: Marginal::power_law(1.0).unwrap(),
        };
        let pool = build_pool(&spec, &mut rng(0)).unwrap();
        let plan = allocate_holistic(20, 20, 2, &mut rng(1)).unwrap();
        let s = report_truthful(plan.block(0), &pool, ).unwrap();
        assert_eq!(s.evaluated_count(), 200);
        for (i, j) in plan.block(0).cells() {
            assert_eq!(s.score(i, j), Some(pool.value(i, j)));
        }
        for (i, j) in plan.block(1).cells() {
            assert_eq!(s.cell(i, j), Cell::Unassigned);
        }
    }

    #[test]
    fn biased_rule() {
        let pool = pool_2x2();
        let s = report_biased(&full(&pool), &pool, 0.0).unwrap();
        assert_eq!(s.score(0, 0), Some(0.0));
        assert_eq!(s.score(1, 0), Some(7.3));
        assert_eq!(s.score(0, 1), Some(2.0));
        let s = report_biased(&full(&pool), &pool, 0.4).unwrap();
        assert_eq!(s.score(0, 1), Some(2.0));
        assert!(report_biased(&full(&pool), &pool, 1.0).is_err());
    }

    #[test]
    fn unbiased_coin_reports_truth() {
        let pool = pool_2x2();
        let mut out = ScoreMatrix::new(2, 2);
        EvaluatorProfile::biased(0.0, false).unwrap().report(&full(&pool), &pool, &mut out).unwrap();
        assert_eq!(out.score(0, 0), Some(7.3));
    }

    #[test]
    fn composite_keeps_partition() {
        let spec = PoolSpec {
            n: 4, d: 2, sigma: 0.0, alpha: 0.5, lambda: 1.0,
            marginal: Marginal::power_law(1.0).unwrap(),
        };
        let pool = build_pool(&spec, &mut rng(2)).unwrap();
        let plan = allocate_segmented(4, 2, 2, &mut rng(3)).unwrap();
        let mut a = report_truthful(plan.block(0), &pool).unwrap();
        let b = report_biased(plan.block(1), &pool, 0.0).unwrap();
        a.merge(&b).unwrap();
        assert!(a.is_complete());
        assert!(matches!(a.merge(&b), Err(Error::OverlappingCells { .. })));
    }

    #[test]
    fn binner_examples() {
        let pool = single_column_pool(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let bins: Vec<u32> = report_quantile_binned(&full(&pool), &pool, 5)
            .unwrap()
            .into_iter()
            .map(|(_, b)| b.value())
            .collect();
        assert_eq!(bins, vec![1, 2, 3, 4, 5]);

        let vals: Vec<f64> = (0..20).map(|i| 1.0 + ((i * 7) % 20) as f64).collect();
        let pool = single_column_pool(&vals);
        let mut counts = [0; 5];
        for (i, b) in report_quantile_binned(&full(&pool), &pool, 5).unwrap() {
            counts[b.value() as usize - 1] += 1;
            let rank = vals.iter().filter(|&&v| v <= vals[i]).count() as u32;
            assert_eq!(b.value(), rank.div_ceil(4));
        }
        assert_eq!(counts, [4; 5]);

        // ceil(5 r / 7) for r = 1..7 is 1,2,3,3,4,5,5
        let pool = single_column_pool(&[3.0, 1.0, 7.0, 2.0, 6.0, 5.0, 4.0]);
        let mut counts = [0; 5];
        for (_, b) in report_quantile_binned(&full(&pool), &pool, 5).unwrap() {
            counts[b.value() as usize - 1] += 1;
        }
        let oracle: Vec<usize> = (1..=5)
            .map(|k| (1..=7).filter(|r| (5 * r + 6) / 7 == k).count())
            .collect();
        assert_eq!(counts.to_vec(), oracle);
        assert_eq!(counts, [1, 1, 2, 1, 2]);
    }

    #[test]
    fn binner_rejects_multi_attribute() {
        let pool = pool_2x2();
        assert!(matches!(
            report_quantile_binned(&full(&pool), &pool, 5),
            Err(Error::UnsupportedOwnership(_))
        ));
    }

    #[test]
    fn screener_counts() {
        let spec = PoolSpec {
            n: 200, d: 2, sigma: 0.3, alpha: 0.0, lambda: 0.0,
            marginal: Marginal::power_law(1.0).unwrap(),
        };
        let pool = build_pool(&spec, &mut rng(4)).unwrap();
        let plan = allocate_holistic(200, 2, 2, &mut rng(5)).unwrap();
        let s = report_screened(plan.block(0), &pool, 1.0).unwrap();
        assert_eq!(s.evaluated_count(), 200);
        let s = report_screened(plan.block(0), &pool, 0.1).unwrap();
        assert_eq!(s.evaluated_count(), 100 + 10);
        let second: Vec<usize> = plan.block(0).rows.iter().copied().filter(|&i| s.is_evaluated(i, 1)).collect();
        let cutoff = second.iter().map(|&i| pool.value(i, 0)).fold(f64::INFINITY, f64::min);
        for &i in &plan.block(0).rows {
            if !s.is_evaluated(i, 1) {
                assert!(pool.value(i, 0) < cutoff);
                assert_eq!(s.cell(i, 1), Cell::Skipped);
            }
        }
        assert!(report_screened(plan.block(0), &pool, 0.0).is_err());
    }

    #[test]
    fn screening_keeps_best_under_perfect_correlation() {
        let spec = PoolSpec {
            n: 40, d: 2, sigma: 1.0, alpha: 0.0, lambda: 0.0,
            marginal: Marginal::power_law(1.0).unwrap(),
        };
        for r in 0..20 {
            let pool = build_pool(&spec, &mut rng(100 + r)).unwrap();
            let plan = allocate_holistic(40, 2, 2, &mut rng(200 + r)).unwrap();
            for block in plan.blocks() {
                let s = report_screened(block, &pool, 0.05).unwrap();
                let best = *block.rows.iter().max_by(|&&a, &&b| pool.value(a, 0).total_cmp(&pool.value(b, 0))).unwrap();
                assert!(s.is_evaluated(best, 1));
            }
        }
    }

    #[test]
    fn screened_count_rounding() {
        assert_eq!(screened_count(0.1, 100), 10);
        assert_eq!(screened_count(0.1, 30), 3);
        assert_eq!(screened_count(0.05, 100), 5);
        assert_eq!(screened_count(0.01, 10), 1);
        assert_eq!(screened_count(0.15, 10), 2);
        assert_eq!(screened_count(1.0, 7), 7);
    }

    #[test]
    fn bias_coin_frequency() {
        let mut r = rng(9);
        let draws = 100_000;
        let gamma = 0.3;
        let hits = (0..draws).filter(|_| draw_bias_coin(gamma, &mut r).unwrap()).count();
        let f = hits as f64 / draws as f64;
        let se = (gamma * (1.0 - gamma) / draws as f64).sqrt();
        assert!((f - gamma).abs() <= 3.0 * se, "{f}");
        assert!(draw_bias_coin(1.5, &mut r).is_err());
    }

    #[test]
    fn binner_consistent_for_large_samples() {
        let law = crate::distributions::PowerLaw::new(1.0).unwrap();
        let mut r = rng(10);
        let vals: Vec<f64> = (0..10_000).map(|_| law.sample(&mut r)).collect();
        let pool = single_column_pool(&vals);
        let bins = report_quantile_binned(&full(&pool), &pool, 5).unwrap();
        let agree = bins
            .iter()
            .filter(|(i, b)| crate::metrics::percentile_bin(law.cdf(vals[*i]), 5).unwrap() == *b)
            .count();
        assert!(agree as f64 / 10_000.0 >= 0.95);
    }

    proptest! {
        #[test]
        fn biased_never_inflates(seed in 0u64..500, beta in 0.0f64..0.999, alpha in 0.0f64..=1.0, lambda in 0.0f64..=1.0) {
            let spec = PoolSpec {
                n: 8, d: 4, sigma: 0.5, alpha, lambda,
                marginal: Marginal::power_law(1.0).unwrap(),
            };
            let pool = build_pool(&spec, &mut rng(1000 + seed)).unwrap();
            let s = report_biased(&full(&pool), &pool, beta).unwrap();
            for i in 0..8 {
                for j in 0..4 {
                    let y = s.score(i, j).unwrap();
                    let x = pool.value(i, j);
                    prop_assert!(y <= x);
                    let discounted = pool.is_protected(j) && pool.is_disadvantaged(i);
                    prop_assert_eq!(y == x, !discounted);
                }
            }
        }

        #[test]
        fn screener_work(m in 1usize..60, tau in 0.01f64..=1.0, seed in 0u64..100) {
            let spec = PoolSpec {
                n: 2 * m.max(1), d: 2, sigma: 0.2, alpha: 0.0, lambda: 0.0,
                marginal: Marginal::power_law(1.0).unwrap(),
            };
            prop_assume!(spec.n >= 2);
            let pool = build_pool(&spec, &mut rng(5000 + seed)).unwrap();
            let plan = allocate_holistic(spec.n, 2, 2, &mut rng(6000 + seed)).unwrap();
            let s = report_screened(plan.block(0), &pool, tau).unwrap();
            prop_assert_eq!(s.evaluated_count(), m + screened_count(tau, m));
        }
    }
}
