//! Monte Carlo simulator for distributed evaluation.
//!
//! Applicants carry `d` attributes; evaluators are handed disjoint blocks of
//! the applicant x attribute grid, either whole applicants (holistic), whole
//! attributes (segmented) or rectangles in between. The crate samples
//! applicant pools, runs evaluator behavior models over an allocation, and
//! measures how well the pooled scores recover the true best applicant.

pub mod allocation;
pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod evaluators;
pub mod experiments;
pub mod metrics;
pub mod population;
pub mod rng;

pub use error::{Error, Result};
