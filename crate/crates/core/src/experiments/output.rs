//! Result rows, CSV tables and run metadata.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::Summary;
use crate::error::{Error, Result};

/// One parameter point's estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub params: Vec<(String, f64)>,
    pub scheme: String,
    pub estimate: f64,
    pub std_error: f64,
    pub runs: u64,
    pub seed: u64,
}

impl ExperimentResult {
    pub fn new(params: &[(&str, f64)], scheme: &str, summary: Summary, seed: u64) -> Self {
        ExperimentResult {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            scheme: scheme.to_string(),
            estimate: summary.mean,
            std_error: summary.std_error,
            runs: summary.runs,
            seed,
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// `name=value ... scheme: estimate ± se`, both to 4 significant figures.
    pub fn summary_line(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{} {}: {} ± {}",
            params.join(" "),
            self.scheme,
            sig4(self.estimate),
            sig4(self.std_error)
        )
    }
}

/// Formats to four significant figures.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.3}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=6).contains(&magnitude) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes `param_1,...,param_k,scheme,estimate,std_error,runs,seed`.
///
/// All rows must carry the same parameter names in the same order.
pub fn write_csv<W: Write>(rows: &[ExperimentResult], mut out: W) -> Result<()> {
    let names: Vec<&str> = rows
        .first()
        .map(|r| r.params.iter().map(|(k, _)| k.as_str()).collect())
        .unwrap_or_default();
    let mut header: Vec<&str> = names.clone();
    header.extend(["scheme", "estimate", "std_error", "runs", "seed"]);
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let these: Vec<&str> = r.params.iter().map(|(k, _)| k.as_str()).collect();
        if these != names {
            return Err(Error::param("params", format!("row columns {these:?} differ from {names:?}")));
        }
        let mut fields: Vec<String> = r.params.iter().map(|(_, v)| v.to_string()).collect();
        fields.push(r.scheme.clone());
        fields.push(r.estimate.to_string());
        fields.push(r.std_error.to_string());
        fields.push(r.runs.to_string());
        fields.push(r.seed.to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_csv_file(rows: &[ExperimentResult], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Companion JSON written next to every CSV.
///
/// `config` holds the resolved key/value settings; feeding the file back as
/// `--config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config: BTreeMap<String, String>,
    pub grid: serde_json::Value,
    #[serde(default)]
    pub checks: BTreeMap<String, bool>,
}

impl Metadata {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}
