//! Partitions of the applicant x attribute grid among evaluators.
//!
//! Every plan is a product of a row partition and a column partition: rows
//! and columns are shuffled, then cut into equal consecutive groups, and
//! each (row group, column group) pair is one evaluator's block. Holistic
//! plans use a single column group, segmented plans a single row group.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Holistic,
    Segmented,
    Blocked { rows_per_eval: usize, cols_per_eval: usize },
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Holistic => "holistic",
            Scheme::Segmented => "segmented",
            Scheme::Blocked { .. } => "blocked",
        }
    }
}

/// The cells owned by one evaluator: every (row, col) in `rows x cols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Block {
    pub fn cell_count(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().flat_map(move |&i| self.cols.iter().map(move |&j| (i, j)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPlan {
    n: usize,
    d: usize,
    scheme: Scheme,
    blocks: Vec<Block>,
    row_group: Vec<usize>,
    col_group: Vec<usize>,
    col_groups: usize,
}

impl AllocationPlan {
    fn from_permutations(
        scheme: Scheme,
        rows: &[usize],
        cols: &[usize],
        rows_per_eval: usize,
        cols_per_eval: usize,
    ) -> Self {
        let (n, d) = (rows.len(), cols.len());
        let row_chunks: Vec<&[usize]> = rows.chunks(rows_per_eval).collect();
        let col_chunks: Vec<&[usize]> = cols.chunks(cols_per_eval).collect();
        let mut row_group = vec![0; n];
        for (g, chunk) in row_chunks.iter().enumerate() {
            for &i in *chunk {
                row_group[i] = g;
            }
        }
        let mut col_group = vec![0; d];
        for (g, chunk) in col_chunks.iter().enumerate() {
            for &j in *chunk {
                col_group[j] = g;
            }
        }
        let mut blocks = Vec::with_capacity(row_chunks.len() * col_chunks.len());
        for r in &row_chunks {
            for c in &col_chunks {
                let mut rows = r.to_vec();
                let mut cols = c.to_vec();
                rows.sort_unstable();
                cols.sort_unstable();
                blocks.push(Block { rows, cols });
            }
        }
        AllocationPlan { n, d, scheme, blocks, row_group, col_group, col_groups: col_chunks.len() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn num_evaluators(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, evaluator: usize) -> &Block {
        &self.blocks[evaluator]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Evaluator owning cell `(i, j)`.
    pub fn evaluator_of(&self, i: usize, j: usize) -> usize {
        self.row_group[i] * self.col_groups + self.col_group[j]
    }

    /// Writes `applicant,attribute,evaluator`, row-major over cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "applicant,attribute,evaluator")?;
        for i in 0..self.n {
            for j in 0..self.d {
                writeln!(out, "{i},{j},{}", self.evaluator_of(i, j))?;
            }
        }
        Ok(())
    }
}

fn shuffled(len: usize, rng: &mut Stream) -> Vec<usize> {
    let mut v: Vec<usize> = (0..len).collect();
    v.shuffle(rng);
    v
}

fn check_split(name: &'static str, total: usize, parts: usize, what: &str) -> Result<()> {
    if parts == 0 {
        return Err(Error::param(name, "must be positive"));
    }
    if parts > total {
        return Err(Error::param(name, format!("{parts} exceeds the {total} {what}")));
    }
    if !total.is_multiple_of(parts) {
        return Err(Error::param(name, format!("{parts} does not divide the {total} {what}")));
    }
    Ok(())
}

/// Each evaluator gets all `d` attributes of `n / num_evaluators` random applicants.
pub fn allocate_holistic(n: usize, d: usize, num_evaluators: usize, rng: &mut Stream) -> Result<AllocationPlan> {
    check_split("num_evaluators", n, num_evaluators, "applicants")?;
    if d == 0 {
        return Err(Error::param("d", "need at least one attribute"));
    }
    let rows = shuffled(n, rng);
    let cols: Vec<usize> = (0..d).collect();
    Ok(AllocationPlan::from_permutations(Scheme::Holistic, &rows, &cols, n / num_evaluators, d))
}

/// Each evaluator gets `d / num_evaluators` random attributes of every applicant.
pub fn allocate_segmented(n: usize, d: usize, num_evaluators: usize, rng: &mut Stream) -> Result<AllocationPlan> {
    check_split("num_evaluators", d, num_evaluators, "attributes")?;
    if n == 0 {
        return Err(Error::param("n", "need at least one applicant"));
    }
    let rows: Vec<usize> = (0..n).collect();
    let cols = shuffled(d, rng);
    Ok(AllocationPlan::from_permutations(Scheme::Segmented, &rows, &cols, n, d / num_evaluators))
}

/// Intermediate points: `rows_per_eval x cols_per_eval` blocks over
/// independently shuffled rows and columns.
pub fn allocate_blocked(
    n: usize,
    d: usize,
    rows_per_eval: usize,
    cols_per_eval: usize,
    rng: &mut Stream,
) -> Result<AllocationPlan> {
    if rows_per_eval == 0 || !n.is_multiple_of(rows_per_eval) {
        return Err(Error::param("rows_per_eval", format!("{rows_per_eval} does not divide n = {n}")));
    }
    if cols_per_eval == 0 || !d.is_multiple_of(cols_per_eval) {
        return Err(Error::param("cols_per_eval", format!("{cols_per_eval} does not divide d = {d}")));
    }
    let rows = shuffled(n, rng);
    let cols = shuffled(d, rng);
    let scheme = Scheme::Blocked { rows_per_eval, cols_per_eval };
    Ok(AllocationPlan::from_permutations(scheme, &rows, &cols, rows_per_eval, cols_per_eval))
}
