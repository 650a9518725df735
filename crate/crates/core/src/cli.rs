//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use crate::allocation::{allocate_blocked, allocate_holistic, allocate_segmented, Scheme};
use crate::config::{self, Experiment, Settings, COMMON_KEYS};
use crate::error::Result;
use crate::experiments::bias::run_bias_grid;
use crate::experiments::calibration::run_calibration_sweep;
use crate::experiments::efficiency::run_efficiency_sweep;
use crate::experiments::output::sig4;
use crate::experiments::theorem::run_theorem_verify;
use crate::experiments::{write_csv_file, Executor, ExperimentResult, Metadata};
use crate::population::{build_pool, true_best};
use crate::rng::{domain, StreamFactory};

/// Default output directory when neither `--out` nor the config sets one.
pub const OUT_DIR_ENV: &str = "ALLOCSIM_OUT_DIR";

pub fn command() -> Command {
    let mut cmd = Command::new("allocsim")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Monte Carlo simulator for holistic and segmented evaluation")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for exp in Experiment::ALL {
        let mut sub = Command::new(exp.name()).about(exp.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("key = value file, or a metadata JSON from an earlier run"),
        );
        for key in COMMON_KEYS.iter().chain(exp.keys()) {
            let long = key.name.replace('_', "-");
            let mut help = key.help.to_string();
            if let Some(d) = key.default {
                help.push_str(&format!(" [default: {d}]"));
            }
            if key.name == "out" {
                help.push_str(&format!(" [env: {OUT_DIR_ENV}, default: results]"));
            }
            sub = sub.arg(Arg::new(key.name).long(long).value_name("VALUE").help(help).action(ArgAction::Set));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// What one invocation will do, fully resolved.
struct Plan {
    settings: Settings,
    job: Job,
    out: PathBuf,
    executor: Executor,
}

enum Job {
    Calibration(crate::experiments::calibration::CalibrationConfig),
    Efficiency(crate::experiments::efficiency::EfficiencyConfig),
    BiasGrid(crate::experiments::bias::GridSpec),
    Theorem(crate::experiments::theorem::TheoremConfig),
    PoolDump(config::PoolDumpConfig),
}

fn resolve(exp: Experiment, m: &ArgMatches) -> Result<Plan> {
    let file = match m.get_one::<String>("config") {
        Some(path) => config::read_config_file(Path::new(path), exp)?,
        None => BTreeMap::new(),
    };
    let mut flags = BTreeMap::new();
    for key in COMMON_KEYS.iter().chain(exp.keys()) {
        if let Some(v) = m.get_one::<String>(key.name) {
            flags.insert(key.name.to_string(), v.clone());
        }
    }
    let mut settings = Settings::resolve(exp, file, flags)?;
    let job = match exp {
        Experiment::Calibration => Job::Calibration(config::calibration_config(&settings)?),
        Experiment::Efficiency => Job::Efficiency(config::efficiency_config(&settings)?),
        Experiment::BiasGrid => Job::BiasGrid(config::bias_grid_spec(&mut settings)?),
        Experiment::TheoremVerify => Job::Theorem(config::theorem_config(&settings)?),
        Experiment::PoolDump => Job::PoolDump(config::pool_dump_config(&settings)?),
    };
    let out = settings
        .raw("out")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let executor = match settings.workers()? {
        Some(w) => Executor::new(w)?,
        None => Executor::with_available_parallelism()?,
    };
    Ok(Plan { settings, job, out, executor })
}

fn metadata(plan: &Plan, grid: serde_json::Value, checks: BTreeMap<String, bool>) -> Result<Metadata> {
    Ok(Metadata {
        experiment: plan.settings.experiment().name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: plan.settings.seed()?,
        workers: plan.executor.workers(),
        config: plan.settings.reproducible(),
        grid,
        checks,
    })
}

fn print_rows(rows: &[ExperimentResult]) {
    for r in rows {
        println!("{}", r.summary_line());
    }
}

fn execute(plan: &Plan) -> Result<()> {
    fs::create_dir_all(&plan.out)?;
    let out = |name: &str| plan.out.join(name);
    let exec = &plan.executor;
    match &plan.job {
        Job::Calibration(cfg) => {
            let report = run_calibration_sweep(cfg, exec)?;
            write_csv_file(&report.results, &out("calibration.csv"))?;
            print_rows(&report.results);
            println!("log-log slope: {}", sig4(report.loglog_slope));
            let checks = BTreeMap::from([("strictly_decreasing".to_string(), report.strictly_decreasing)]);
            metadata(plan, json!({ "sweep": cfg, "loglog_slope": report.loglog_slope }), checks)?
                .write(&out("calibration.json"))?;
        }
        Job::Efficiency(cfg) => {
            let report = run_efficiency_sweep(cfg, exec)?;
            write_csv_file(&report.accuracy_rows(), &out("efficiency.csv"))?;
            write_csv_file(&report.work_rows(), &out("efficiency_cells.csv"))?;
            for p in &report.points {
                println!(
                    "tau={} sigma={} holistic: {} ± {} ({} cells)",
                    p.tau,
                    p.sigma,
                    sig4(p.accuracy.mean),
                    sig4(p.accuracy.std_error),
                    sig4(p.cells_evaluated.mean)
                );
            }
            metadata(plan, serde_json::to_value(cfg)?, BTreeMap::new())?.write(&out("efficiency.json"))?;
        }
        Job::BiasGrid(grid) => {
            let report = run_bias_grid(grid, plan.settings.seed()?, exec)?;
            let rows = report.rows();
            write_csv_file(&rows, &out("bias_grid.csv"))?;
            print_rows(&rows);
            metadata(plan, serde_json::to_value(grid)?, BTreeMap::new())?.write(&out("bias_grid.json"))?;
        }
        Job::Theorem(cfg) => {
            let report = run_theorem_verify(cfg, exec)?;
            write_csv_file(&report.ordering_rows(), &out("theorem_ordering.csv"))?;
            write_csv_file(&report.formula_rows(), &out("theorem_formula.csv"))?;
            write_csv_file(&report.tail_rows(), &out("theorem_tail.csv"))?;
            write_csv_file(&report.decomposition_rows(), &out("theorem_decomposition.csv"))?;
            for p in &report.ordering {
                println!(
                    "n={} delta={} gamma={} beta={} lambda=0.5: err_hol - err_seg = {} ± {}",
                    p.n,
                    p.delta,
                    p.gamma,
                    p.beta,
                    sig4(p.difference.mean),
                    sig4(p.difference.std_error)
                );
            }
            for p in &report.formula {
                let predicted = p.predicted();
                let mut line = format!(
                    "n={} delta={} gamma={} lambda=1 beta=0: err_hol - err_seg = {} ± {}, formula {} ± {}",
                    p.n,
                    p.delta,
                    p.gamma,
                    sig4(p.difference.mean),
                    sig4(p.difference.std_error),
                    sig4(predicted.mean),
                    sig4(predicted.std_error)
                );
                if let Some(exact) = p.exact {
                    line.push_str(&format!(", exact {}", sig4(exact)));
                }
                println!("{line}");
            }
            for t in &report.tail {
                println!(
                    "group_size={} delta={}: P(X_dis^max < 2 X_adv^max) = {} ± {}, approximation {}",
                    t.group_size,
                    t.delta,
                    sig4(t.estimate.mean),
                    sig4(t.estimate.std_error),
                    sig4(t.approximation)
                );
            }
            let checks = report.checks();
            for (name, ok) in &checks {
                println!("check {name}: {}", if *ok { "pass" } else { "FAIL" });
            }
            metadata(plan, serde_json::to_value(cfg)?, checks)?.write(&out("theorem_verify.json"))?;
        }
        Job::PoolDump(cfg) => {
            let streams = StreamFactory::new(cfg.seed);
            let mut rng = streams.stream(domain::POOL_DUMP, 0);
            let pool = build_pool(&cfg.spec, &mut rng)?;
            let (n, d) = (cfg.spec.n, cfg.spec.d);
            let plan_ = match cfg.scheme {
                Scheme::Holistic => allocate_holistic(n, d, cfg.evaluators, &mut rng)?,
                Scheme::Segmented => allocate_segmented(n, d, cfg.evaluators, &mut rng)?,
                Scheme::Blocked { rows_per_eval, cols_per_eval } => {
                    allocate_blocked(n, d, rows_per_eval, cols_per_eval, &mut rng)?
                }
            };
            pool.write_csv(fs::File::create(out("pool.csv"))?)?;
            plan_.write_csv(fs::File::create(out("plan.csv"))?)?;
            println!(
                "n={n} d={d} scheme={}: {} evaluators, best applicant {} ({}), {} disadvantaged, {} protected",
                cfg.scheme.label(),
                plan_.num_evaluators(),
                true_best(&pool),
                pool.group(true_best(&pool)).as_str(),
                pool.disadvantaged_count(),
                pool.protected_count()
            );
            let grid = json!({
                "n": n, "d": d, "sigma": cfg.spec.sigma, "alpha": cfg.spec.alpha,
                "lambda": cfg.spec.lambda, "marginal": cfg.spec.marginal, "scheme": cfg.scheme.label(),
            });
            metadata(plan, grid, BTreeMap::new())?.write(&out("pool_dump.json"))?;
        }
    }
    Ok(())
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 on a configuration error, 1 on a failure while running.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return 2;
    };
    let plan = match name.parse::<Experiment>().and_then(|exp| resolve(exp, sub)) {
        Ok(plan) => plan,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&plan) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
