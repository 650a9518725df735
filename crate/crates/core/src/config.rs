//! Flat `key = value` settings shared by config files and command-line flags.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment
//! and list values are comma separated. The JSON metadata written next to
//! every result table is accepted as well, through its `config` map. Flags
//! override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::allocation::Scheme;
use crate::distributions::{Marginal, TruncatedNormal};
use crate::error::{Error, Result};
use crate::experiments::bias::{Axis, BiasParams, CoinMode, GridSpec, Param};
use crate::experiments::calibration::CalibrationConfig;
use crate::experiments::efficiency::EfficiencyConfig;
use crate::experiments::theorem::TheoremConfig;
use crate::experiments::Metadata;

/// The experiments reachable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Calibration,
    Efficiency,
    BiasGrid,
    TheoremVerify,
    PoolDump,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Calibration,
        Experiment::Efficiency,
        Experiment::BiasGrid,
        Experiment::TheoremVerify,
        Experiment::PoolDump,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Calibration => "calibration",
            Experiment::Efficiency => "efficiency",
            Experiment::BiasGrid => "bias-grid",
            Experiment::TheoremVerify => "theorem-verify",
            Experiment::PoolDump => "pool-dump",
        }
    }

    pub fn about(&self) -> &'static str {
        match self {
            Experiment::Calibration => "Calibration error of a quantile-binning evaluator against pool size",
            Experiment::Efficiency => "Accuracy and work of holistic screening against the screened fraction",
            Experiment::BiasGrid => "Holistic vs segmented accuracy with a biased evaluator over a parameter grid",
            Experiment::TheoremVerify => "Monte Carlo checks of the holistic vs segmented error comparison",
            Experiment::PoolDump => "Write one sampled pool and allocation plan as CSV",
        }
    }

    /// Settings understood by this experiment, besides the common ones.
    pub fn keys(&self) -> &'static [Key] {
        match self {
            Experiment::Calibration => CALIBRATION_KEYS,
            Experiment::Efficiency => EFFICIENCY_KEYS,
            Experiment::BiasGrid => BIAS_KEYS,
            Experiment::TheoremVerify => THEOREM_KEYS,
            Experiment::PoolDump => POOL_KEYS,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{s}`")))
    }
}

/// One recognized setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub default: Option<&'static str>,
}

const fn key(name: &'static str, help: &'static str, default: Option<&'static str>) -> Key {
    Key { name, help, default }
}

/// Keys accepted by every experiment. `out` and `workers` do not affect results.
pub const COMMON_KEYS: &[Key] = &[
    key("seed", "master seed (required)", None),
    key("workers", "worker threads (default: available cores)", None),
    key("out", "output directory", None),
];

const CALIBRATION_KEYS: &[Key] = &[
    key("n", "pool sizes", Some("5,10,20,50,100,200,500,1000")),
    key("bins", "number of percentile bins", Some("5")),
    key("runs", "runs per point", Some("1000")),
    key("marginal", "power_law or truncated_normal", Some("power_law")),
    key("delta", "power-law tail parameter", Some("1")),
];

const EFFICIENCY_KEYS: &[Key] = &[
    key("tau", "screened fractions", Some("0.05,0.1,0.2,0.5,1")),
    key("sigma", "attribute correlations", Some("0,0.5,0.9,1")),
    key("n", "applicants", Some("200")),
    key("delta", "power-law tail parameter", Some("1")),
    key("evaluators", "number of evaluators", Some("2")),
    key("runs", "runs per point", Some("1000")),
];

const BIAS_KEYS: &[Key] = &[
    key("axes", "the varying parameters", Some("delta,sigma")),
    key("n", "applicants", None),
    key("d", "attributes", None),
    key("sigma", "attribute correlation", None),
    key("alpha", "disadvantaged fraction", None),
    key("lambda", "protected fraction", None),
    key("beta", "bias factor", None),
    key("gamma", "bias probability (independent coins only)", None),
    key("delta", "power-law tail parameter", None),
    key("evaluators", "number of evaluators", None),
    key("coins", "one_biased or independent", Some("one_biased")),
    key("runs", "runs per point", Some("50000")),
];

const THEOREM_KEYS: &[Key] = &[
    key("n", "pool sizes (even)", Some("2,20")),
    key("delta", "power-law tail parameters", Some("0.3,1")),
    key("gamma", "bias probabilities", Some("0.5")),
    key("beta", "bias factors for the ordering check", Some("0,0.3,0.7")),
    key("sigma", "attribute correlation (must be 1)", Some("1")),
    key("d", "attributes (must be 2)", Some("2")),
    key("runs", "runs per point", Some("100000")),
    key("oracle_draws", "draws of the group-maximum oracle", Some("1000000")),
    key("tail_draws", "draws for the large-pool tail check", Some("10000")),
    key("tail_group_size", "group sizes for the tail check", Some("10000")),
    key("tail_tolerance", "absolute tolerance of the tail check", Some("0.015")),
    key("threshold_min_n", "smallest n entering the threshold check", Some("500")),
    key("threshold_margin", "distance from the threshold for the sign check", Some("0.25")),
];

const POOL_KEYS: &[Key] = &[
    key("n", "applicants", Some("20")),
    key("d", "attributes", Some("20")),
    key("sigma", "attribute correlation", Some("0.5")),
    key("alpha", "disadvantaged fraction", Some("0.5")),
    key("lambda", "protected fraction", Some("1")),
    key("delta", "power-law tail parameter", Some("1")),
    key("scheme", "holistic, segmented or blocked", Some("holistic")),
    key("evaluators", "evaluators (holistic, segmented)", Some("2")),
    key("rows_per_eval", "rows per block (blocked)", Some("10")),
    key("cols_per_eval", "columns per block (blocked)", Some("10")),
];

/// Resolved settings of one experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    experiment: Experiment,
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim().replace('-', "_");
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::config(k, "given twice"));
        }
    }
    Ok(out)
}

/// Reads a flat config file, or the `config` map of a metadata JSON file.
pub fn read_config_file(path: &Path, experiment: Experiment) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let meta: Metadata =
            serde_json::from_str(&text).map_err(|e| Error::config("config", format!("bad metadata JSON: {e}")))?;
        if meta.experiment != experiment.name() {
            return Err(Error::config(
                "experiment",
                format!("metadata describes `{}`, not `{experiment}`", meta.experiment),
            ));
        }
        Ok(meta.config)
    } else {
        parse_flat(&text)
    }
}

impl Settings {
    /// Layers `flags` over `file` and fills in defaults; unknown keys and a
    /// missing seed are rejected.
    pub fn resolve(
        experiment: Experiment,
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self> {
        let known = |k: &str| COMMON_KEYS.iter().chain(experiment.keys()).any(|key| key.name == k);
        let mut values = BTreeMap::new();
        for (k, v) in file.into_iter().chain(flags) {
            let k = k.replace('-', "_");
            if !known(&k) {
                return Err(Error::config(k, format!("unknown key for {experiment}")));
            }
            values.insert(k, v);
        }
        for key in experiment.keys() {
            if let Some(default) = key.default {
                values.entry(key.name.to_string()).or_insert_with(|| default.to_string());
            }
        }
        if !values.contains_key("seed") {
            return Err(Error::config("seed", "seed required"));
        }
        let settings = Settings { experiment, values };
        settings.seed()?;
        Ok(settings)
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Settings that determine the results, i.e. all but `out` and `workers`.
    pub fn reproducible(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| k.as_str() != "out" && k.as_str() != "workers")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    fn insert(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key).ok_or_else(|| Error::config(key, "missing value"))?;
        parse_value(key, raw)
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|raw| parse_value(key, raw)).transpose()
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key).ok_or_else(|| Error::config(key, "missing value"))?;
        parse_list(key, raw)
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn workers(&self) -> Result<Option<usize>> {
        let w: Option<usize> = self.get_opt("workers")?;
        if w == Some(0) {
            return Err(Error::config("workers", "need at least one worker"));
        }
        Ok(w)
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{raw}`")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(key, "empty list"));
    }
    Ok(items)
}

/// Tags a validation failure with the key it came from.
fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::config(name, reason),
        other => other,
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn calibration_config(s: &Settings) -> Result<CalibrationConfig> {
    let marginal = match s.raw("marginal").unwrap_or("power_law") {
        "power_law" => Marginal::power_law(s.get("delta")?).map_err(as_config)?,
        "truncated_normal" => Marginal::TruncatedNormal(TruncatedNormal::calibration_scores()),
        other => return Err(Error::config("marginal", format!("unknown marginal `{other}`"))),
    };
    let cfg = CalibrationConfig {
        ns: s.list("n")?,
        num_bins: s.get("bins")?,
        runs: s.get("runs")?,
        marginal,
        seed: s.seed()?,
    };
    cfg.validate().map_err(as_config)?;
    Ok(cfg)
}

pub fn efficiency_config(s: &Settings) -> Result<EfficiencyConfig> {
    let cfg = EfficiencyConfig {
        taus: s.list("tau")?,
        sigmas: s.list("sigma")?,
        n: s.get("n")?,
        delta: s.get("delta")?,
        evaluators: s.get("evaluators")?,
        runs: s.get("runs")?,
        seed: s.seed()?,
    };
    cfg.validate().map_err(as_config)?;
    Ok(cfg)
}

/// Builds the grid; axis parameters take lists, the rest single values.
///
/// Unset axes fall back to the standard `delta` and `sigma` ranges, or to
/// the single default value for other parameters. The resolved values are
/// written back into `s` so the metadata records them.
pub fn bias_grid_spec(s: &mut Settings) -> Result<GridSpec> {
    let standard = GridSpec::standard(1);
    let axis_params: Vec<Param> = s.list::<String>("axes")?
        .iter()
        .map(|name| name.parse::<Param>().map_err(|_| Error::config("axes", format!("unknown parameter `{name}`"))))
        .collect::<Result<_>>()?;
    let mut fixed = BiasParams::default();
    let mut axes = Vec::new();
    for param in Param::ALL {
        if matches!(param, Param::Tau | Param::Scheme) {
            if axis_params.contains(&param) {
                return Err(Error::config("axes", format!("`{param}` cannot vary in the bias grid")));
            }
            continue;
        }
        let key = param.name();
        if axis_params.contains(&param) {
            let values = match s.raw(key) {
                Some(raw) => parse_list(key, raw)?,
                None => standard
                    .axes
                    .iter()
                    .find(|a| a.param == param)
                    .map(|a| a.values.clone())
                    .unwrap_or_else(|| vec![current(&fixed, param)]),
            };
            s.insert(key, join(&values));
            axes.push(Axis::new(param, values));
        } else if let Some(raw) = s.raw(key) {
            let v: f64 = parse_value(key, raw)?;
            fixed.set(param, v).map_err(as_config)?;
        } else {
            s.insert(key, current(&fixed, param).to_string());
        }
    }
    // keep the user's axis order
    axes.sort_by_key(|a| axis_params.iter().position(|p| *p == a.param));
    let grid = GridSpec {
        axes,
        fixed,
        runs: s.get("runs")?,
        coins: s.get::<CoinMode>("coins")?,
        require_delta_axis: axis_params == [Param::Delta, Param::Sigma],
    };
    grid.validate().map_err(as_config)?;
    Ok(grid)
}

fn current(p: &BiasParams, param: Param) -> f64 {
    match param {
        Param::N => p.n as f64,
        Param::D => p.d as f64,
        Param::Sigma => p.sigma,
        Param::Alpha => p.alpha,
        Param::Lambda => p.lambda,
        Param::Beta => p.beta,
        Param::Gamma => p.gamma,
        Param::Delta => p.delta,
        Param::Evaluators => p.evaluators as f64,
        Param::Tau | Param::Scheme => f64::NAN,
    }
}

pub fn theorem_config(s: &Settings) -> Result<TheoremConfig> {
    let mut cfg = TheoremConfig::new(s.list("n")?, s.list("delta")?, s.list("gamma")?, s.get("runs")?, s.seed()?);
    cfg.betas = match s.raw("beta") {
        Some(raw) if raw.trim().is_empty() || raw.trim() == "none" => Vec::new(),
        _ => s.list("beta")?,
    };
    cfg.sigma = s.get("sigma")?;
    cfg.d = s.get("d")?;
    cfg.oracle_draws = s.get("oracle_draws")?;
    cfg.tail_draws = s.get("tail_draws")?;
    cfg.tail_group_sizes = s.list("tail_group_size")?;
    cfg.tail_tolerance = s.get("tail_tolerance")?;
    cfg.threshold_min_n = s.get("threshold_min_n")?;
    cfg.threshold_margin = s.get("threshold_margin")?;
    cfg.validate().map_err(as_config)?;
    Ok(cfg)
}

/// Pool parameters and allocation of `pool-dump`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolDumpConfig {
    pub spec: crate::population::PoolSpec,
    pub scheme: Scheme,
    pub evaluators: usize,
    pub seed: u64,
}

pub fn pool_dump_config(s: &Settings) -> Result<PoolDumpConfig> {
    let spec = crate::population::PoolSpec {
        n: s.get("n")?,
        d: s.get("d")?,
        sigma: s.get("sigma")?,
        alpha: s.get("alpha")?,
        lambda: s.get("lambda")?,
        marginal: Marginal::power_law(s.get("delta")?).map_err(as_config)?,
    };
    spec.validate().map_err(as_config)?;
    let scheme = match s.raw("scheme").unwrap_or("holistic") {
        "holistic" => Scheme::Holistic,
        "segmented" => Scheme::Segmented,
        "blocked" => Scheme::Blocked {
            rows_per_eval: s.get("rows_per_eval")?,
            cols_per_eval: s.get("cols_per_eval")?,
        },
        other => return Err(Error::config("scheme", format!("unknown scheme `{other}`"))),
    };
    Ok(PoolDumpConfig { spec, scheme, evaluators: s.get("evaluators")?, seed: s.seed()? })
}
