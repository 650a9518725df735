//! Applicant pools: true attribute values, group labels and protected flags.

use std::io::Write;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};

use crate::distributions::{sample_correlated_matrix, Marginal};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Attempts at drawing a pool with a unique best applicant before giving up.
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Advantaged,
    Disadvantaged,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Advantaged => "advantaged",
            Group::Disadvantaged => "disadvantaged",
        }
    }
}

/// Parameters of a simulated applicant pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSpec {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub marginal: Marginal,
}

impl PoolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("need at least two applicants, got {}", self.n)));
        }
        if self.d == 0 {
            return Err(Error::param("d", "need at least one attribute"));
        }
        check_fraction("alpha", self.alpha)?;
        check_fraction("lambda", self.lambda)?;
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::param("sigma", format!("must lie in [0, 1], got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn disadvantaged_count(&self) -> usize {
        round_count(self.alpha, self.n)
    }

    pub fn protected_count(&self) -> usize {
        round_count(self.lambda, self.d)
    }
}

fn check_fraction(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in [0, 1], got {v}")))
    }
}

/// `round(fraction * total)` with halves rounded up.
pub fn round_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}

/// True qualities of `n` applicants on `d` attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    values: Array2<f64>,
    groups: Vec<Group>,
    protected: Vec<bool>,
}

impl AttributeMatrix {
    /// Assembles a pool from explicit parts. The row-mean argmax must be unique.
    pub fn new(values: Array2<f64>, groups: Vec<Group>, protected: Vec<bool>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(Error::param("values", "pool matrix must be nonempty"));
        }
        if groups.len() != n {
            return Err(Error::param("groups", format!("expected {n} labels, got {}", groups.len())));
        }
        if protected.len() != d {
            return Err(Error::param("protected", format!("expected {d} flags, got {}", protected.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "entries must be finite"));
        }
        if unique_row_mean_argmax(&values).is_none() {
            return Err(Error::param("values", "best applicant is not unique"));
        }
        Ok(AttributeMatrix { values, groups, protected })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn group(&self, i: usize) -> Group {
        self.groups[i]
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn is_disadvantaged(&self, i: usize) -> bool {
        self.groups[i] == Group::Disadvantaged
    }

    pub fn is_protected(&self, j: usize) -> bool {
        self.protected[j]
    }

    pub fn protected(&self) -> &[bool] {
        &self.protected
    }

    pub fn disadvantaged_count(&self) -> usize {
        self.groups.iter().filter(|g| **g == Group::Disadvantaged).count()
    }

    pub fn protected_count(&self) -> usize {
        self.protected.iter().filter(|p| **p).count()
    }

    /// Writes `applicant,group,attr_0..attr_{d-1},protected_mask`.
    ///
    /// The mask is one `0`/`1` character per attribute, repeated on each row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("applicant,group");
        for j in 0..self.d() {
            header.push_str(&format!(",attr_{j}"));
        }
        header.push_str(",protected_mask");
        writeln!(out, "{header}")?;
        let mask: String = self.protected.iter().map(|&p| if p { '1' } else { '0' }).collect();
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut line = format!("{i},{}", self.groups[i].as_str());
            for v in row {
                line.push_str(&format!(",{v}"));
            }
            line.push(',');
            line.push_str(&mask);
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn unique_row_mean_argmax(values: &Array2<f64>) -> Option<usize> {
    let d = values.ncols() as f64;
    let mut best = None;
    let mut best_mean = f64::NEG_INFINITY;
    let mut tied = false;
    for (i, row) in values.rows().into_iter().enumerate() {
        let mean = row.sum() / d;
        if mean > best_mean {
            best_mean = mean;
            best = Some(i);
            tied = false;
        } else if mean == best_mean {
            tied = true;
        }
    }
    if tied {
        None
    } else {
        best
    }
}

/// Draws a pool: copula values, then `round(alpha n)` disadvantaged labels
/// placed at random rows, then `round(lambda d)` protected attributes.
pub fn build_pool(spec: &PoolSpec, rng: &mut Stream) -> Result<AttributeMatrix> {
    let values = draw_values(spec, rng)?;
    label_pool(spec, values, rng)
}

/// Like [`build_pool`], but group labels and protected attributes come from
/// their own stream, so they stay fixed when only the value law changes.
pub fn build_pool_split(spec: &PoolSpec, values_rng: &mut Stream, labels_rng: &mut Stream) -> Result<AttributeMatrix> {
    let values = draw_values(spec, values_rng)?;
    label_pool(spec, values, labels_rng)
}

fn draw_values(spec: &PoolSpec, rng: &mut Stream) -> Result<Array2<f64>> {
    spec.validate()?;
    for _ in 0..MAX_RESAMPLES {
        let v = sample_correlated_matrix(spec.n, spec.d, spec.sigma, &spec.marginal, rng)?;
        if unique_row_mean_argmax(&v).is_some() {
            return Ok(v);
        }
    }
    Err(Error::param("marginal", "could not draw a pool with a unique best applicant"))
}

fn label_pool(spec: &PoolSpec, values: Array2<f64>, rng: &mut Stream) -> Result<AttributeMatrix> {
    // Labeling the first k then shuffling rows is the same as shuffling labels.
    let k = spec.disadvantaged_count();
    let mut groups: Vec<Group> = (0..spec.n)
        .map(|i| if i < k { Group::Disadvantaged } else { Group::Advantaged })
        .collect();
    groups.shuffle(rng);

    let mut protected = vec![false; spec.d];
    for j in index::sample(rng, spec.d, spec.protected_count()) {
        protected[j] = true;
    }

    Ok(AttributeMatrix { values, groups, protected })
}

/// Index of the applicant with the highest mean attribute value.
pub fn true_best(pool: &AttributeMatrix) -> usize {
    unique_row_mean_argmax(&pool.values).expect("pool invariant: unique best applicant")
}
