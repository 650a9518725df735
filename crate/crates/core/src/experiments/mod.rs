//! Monte Carlo experiments and their outputs.

pub mod bias;
pub mod calibration;
pub mod efficiency;
pub mod output;
pub mod runner;
pub mod theorem;

pub use output::{write_csv, write_csv_file, ExperimentResult, Metadata};
pub use runner::{Executor, Summary};
