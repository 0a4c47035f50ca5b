//! `auv-formation`: run, compare, sweep and bound the formation scenario.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 simulation failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use auv_formation::config::{parse_config, parse_config_str, ConfigError};
use auv_formation::io::write_csv;
use auv_formation::sim::{self, ControllerKind, Metrics, RunLog, Scenario, SWEEP_TOL};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

/// Settling tolerance for the scenario-level metric.
const SCENARIO_TOL: f64 = 0.1;

#[derive(Parser)]
#[command(
    name = "auv-formation",
    version,
    about = "Fixed-time multi-AUV formation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario; writes run.csv and metrics.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run adaptive_sat and baseline_smc side by side; writes compare.json.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Initial-error sweep against the practical fixed-time bound; writes mc.json.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Comma-separated initial-error scales.
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        n_random: usize,
    },
    /// Print the settling-time bounds and their constants as JSON.
    Bound {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON); the benchmark scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// ft_backstepping, adaptive_sat or baseline_smc.
    #[arg(long)]
    controller: Option<ControllerKind>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let mut sc = match &common.config {
        Some(path) => parse_config(path)?,
        None => parse_config_str("{}")?,
    };
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    if let Some(dt) = common.dt {
        sc.dt = dt;
    }
    if let Some(t_end) = common.t_end {
        sc.t_end = t_end;
    }
    if let Some(c) = common.controller {
        sc.controller = c;
    }
    sc.validate().map_err(Failure::config)?;
    Ok(sc)
}

fn prepare_out(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| {
        Failure::config(format!(
            "cannot create output directory {}: {e}",
            out.display()
        ))
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_log(path: &Path, log: &RunLog) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_csv(log, &mut buf).map_err(Failure::runtime)?;
    write_file(path, &buf)
}

#[derive(Serialize)]
struct RunMetrics {
    controller: &'static str,
    tol: f64,
    #[serde(flatten)]
    metrics: Metrics,
    scenario_tol: f64,
    scenario_settling_time: Option<f64>,
}

fn metrics_for(sc: &Scenario, log: &RunLog) -> Result<RunMetrics, Failure> {
    let m = sim::compute_metrics(log, SWEEP_TOL).map_err(Failure::runtime)?;
    let strict = sim::compute_metrics(log, SCENARIO_TOL).map_err(Failure::runtime)?;
    Ok(RunMetrics {
        controller: sc.controller.name(),
        tol: SWEEP_TOL,
        metrics: m,
        scenario_tol: SCENARIO_TOL,
        scenario_settling_time: strict.settling_time,
    })
}

fn cmd_run(common: &Common, out: &Path) -> Result<(), Failure> {
    let sc = load(common)?;
    prepare_out(out)?;
    let log = sim::run(&sc).map_err(Failure::runtime)?;
    write_log(&out.join("run.csv"), &log)?;
    write_json(&out.join("metrics.json"), &metrics_for(&sc, &log)?)
}

fn cmd_compare(common: &Common, out: &Path) -> Result<(), Failure> {
    let base = load(common)?;
    prepare_out(out)?;
    let mut report = serde_json::Map::new();
    let mut ok: Vec<(ControllerKind, Metrics)> = Vec::new();
    for kind in [ControllerKind::AdaptiveSat, ControllerKind::BaselineSmc] {
        let sc = Scenario {
            controller: kind,
            ..base.clone()
        };
        match sim::run(&sc) {
            Ok(log) => {
                write_log(&out.join(format!("run_{}.csv", kind.name())), &log)?;
                let m = metrics_for(&sc, &log)?;
                ok.push((kind, m.metrics));
                report.insert(
                    kind.name().into(),
                    serde_json::to_value(&m).expect("serialisable"),
                );
            }
            Err(e) => {
                eprintln!("{}: {e}", kind.name());
                report.insert(kind.name().into(), json!({ "error": e.to_string() }));
            }
        }
    }
    // deltas are baseline minus adaptive
    if let [(_, a), (_, b)] = ok.as_slice() {
        report.insert(
            "deltas".into(),
            json!({
                "peak_torque": b.peak_torque - a.peak_torque,
                "chattering": b.chattering - a.chattering,
                "settling_time": match (b.settling_time, a.settling_time) {
                    (Some(x), Some(y)) => Some(x - y),
                    _ => None,
                },
            }),
        );
    }
    write_json(&out.join("compare.json"), &report)?;
    if ok.is_empty() {
        return Err(Failure::runtime("both controllers failed"));
    }
    Ok(())
}

fn cmd_mc(common: &Common, out: &Path, scales: &[f64], n_random: usize) -> Result<(), Failure> {
    let sc = load(common)?;
    if scales.is_empty() {
        return Err(Failure::config("--scales must not be empty"));
    }
    prepare_out(out)?;
    let table = sim::mc_sweep(&sc, scales, n_random).map_err(Failure::config)?;
    write_json(&out.join("mc.json"), &table)?;
    if table.rows.iter().all(|r| r.error.is_some()) {
        return Err(Failure::runtime("every sweep trial failed"));
    }
    Ok(())
}

fn cmd_bound(common: &Common) -> Result<(), Failure> {
    let sc = load(common)?;
    let report = sim::bound_report(&sc).map_err(Failure::config)?;
    let text = serde_json::to_string_pretty(&report).expect("serialisable");
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::config(e)),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { common, out } => cmd_run(common, out),
        Command::Compare { common, out } => cmd_compare(common, out),
        Command::Mc {
            common,
            out,
            scales,
            n_random,
        } => cmd_mc(common, out, scales, *n_random),
        Command::Bound { common } => cmd_bound(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
