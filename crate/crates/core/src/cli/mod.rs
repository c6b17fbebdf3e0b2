//! The `wiesner` command line.
//!
//! Data goes to `--out` (written atomically) or to stdout; the human summary
//! goes to stderr. Exit codes: 0 success, 1 I/O failure, 2 solver failure
//! (including partial sweep failures), 3 invalid configuration.

pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::horizon::{secure_storage_horizon, DecayModel};
use crate::protocol::{keygen, run_protocol, verdict, verdict_from_values};
use crate::threshold::{compute_threshold, sweep, ThresholdError};
use config::{config_keys_help, ConfigError, Mode, OutputFormat, PlotStyle, RunConfig, CONFIG_ENV};
use output::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "wiesner",
    version,
    about = "Security thresholds, simulations and storage horizons for Wiesner quantum money",
    after_help = config_keys_help()
)]
pub struct Cli {
    /// JSON config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Mean photon number per pulse.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Memory efficiency.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold error rate for one (mu, eta).
    Threshold,
    /// Thresholds on a (mu, eta) grid.
    Sweep(GridArgs),
    /// Monte-Carlo run of the protocol.
    Simulate(SimArgs),
    /// Compare an error rate against the threshold.
    Verdict(VerdictArgs),
    /// Longest secure storage time.
    Horizon(HorizonArgs),
    /// Plot-ready threshold data.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta_values: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub key_length: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub encoding_error: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub memory_efficiency: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub background: Option<f64>,
    /// Apply storage decay at `--storage-time`.
    #[arg(long)]
    pub storage: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub storage_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerdictArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Measured error rate (skips the simulation).
    #[arg(long, requires = "stderr", allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Standard error of `--epsilon`.
    #[arg(long, requires = "epsilon", allow_negative_numbers = true)]
    pub stderr: Option<f64>,
    /// Secure requires epsilon + k * stderr < threshold.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HorizonArgs {
    #[arg(long, value_enum)]
    pub decay: Option<DecayModel>,
    #[arg(long)]
    pub lifetime: Option<f64>,
    #[arg(long)]
    pub eta_ref: Option<f64>,
    #[arg(long)]
    pub epsilon_ref: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub style: Option<PlotStyle>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }
}

impl From<ThresholdError> for CliError {
    fn from(e: ThresholdError) -> Self {
        let code = match e {
            ThresholdError::Solver { .. } => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn validation(message: impl ToString) -> CliError {
    CliError {
        code: EXIT_VALIDATION,
        message: message.to_string(),
    }
}

/// What a successful (or partially successful) command produced.
#[derive(Debug)]
pub struct RunOutput {
    pub data: String,
    pub summary: String,
    pub code: i32,
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::Threshold => Mode::Threshold,
            Command::Sweep(_) => Mode::Sweep,
            Command::Simulate(_) => Mode::Simulate,
            Command::Verdict(_) => Mode::Verdict,
            Command::Horizon(_) => Mode::Horizon,
            Command::PlotData(_) => Mode::PlotData,
        }
    }
}

fn apply_grid(cfg: &mut RunConfig, g: &GridArgs) {
    if let Some(v) = &g.mu_values {
        cfg.grid.mu_values = v.clone();
    }
    if let Some(v) = &g.eta_values {
        cfg.grid.eta_values = v.clone();
    }
}

fn apply_sim(cfg: &mut RunConfig, s: &SimArgs) {
    let c = &mut cfg.channel;
    c.encoding_error = s.encoding_error.unwrap_or(c.encoding_error);
    c.memory_efficiency = s.memory_efficiency.unwrap_or(c.memory_efficiency);
    c.background_click_prob = s.background.unwrap_or(c.background_click_prob);
    c.storage_enabled |= s.storage;
    c.storage_time_us = s.storage_time.unwrap_or(c.storage_time_us);
    cfg.simulation.cycles = s.cycles.unwrap_or(cfg.simulation.cycles);
    cfg.simulation.key_length = s.key_length.unwrap_or(cfg.simulation.key_length);
}

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.mu = cli.mu.unwrap_or(cfg.mu);
    cfg.eta = cli.eta.unwrap_or(cfg.eta);
    cfg.output_format = cli.format.unwrap_or(cfg.output_format);
    if cli.out.is_some() {
        cfg.output_path = cli.out.clone();
    }
    match &cli.command {
        Command::Threshold => {}
        Command::Sweep(g) => apply_grid(&mut cfg, g),
        Command::Simulate(s) => apply_sim(&mut cfg, s),
        Command::Verdict(v) => {
            apply_sim(&mut cfg, &v.sim);
            cfg.verdict.epsilon = v.epsilon.or(cfg.verdict.epsilon);
            cfg.verdict.epsilon_stderr = v.stderr.or(cfg.verdict.epsilon_stderr);
            cfg.verdict.k = v.k.unwrap_or(cfg.verdict.k);
        }
        Command::Horizon(h) => {
            let c = &mut cfg.horizon;
            c.decay = h.decay.unwrap_or(c.decay);
            c.lifetime_us = h.lifetime.unwrap_or(c.lifetime_us);
            c.eta_ref = h.eta_ref.unwrap_or(c.eta_ref);
            c.epsilon_ref = h.epsilon_ref.unwrap_or(c.epsilon_ref);
            c.step_us = h.step.unwrap_or(c.step_us);
        }
        Command::PlotData(p) => {
            cfg.plot.style = p.style.unwrap_or(cfg.plot.style);
            apply_grid(&mut cfg, &p.grid);
        }
    }
    Ok(cfg)
}

fn emit<T: serde::Serialize>(format: OutputFormat, csv: impl FnOnce() -> String, value: &T) -> String {
    match format {
        OutputFormat::Csv => csv(),
        OutputFormat::Json => to_json(value),
    }
}

/// Runs `mode` on a validated config.
pub fn run(mode: Mode, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.validate(mode)?;
    let fmt = cfg.output_format;
    match mode {
        Mode::Threshold => {
            let r = compute_threshold(cfg.mu, cfg.eta)?;
            Ok(RunOutput {
                data: emit(fmt, || threshold_csv(&r), &r),
                summary: format!(
                    "epsilon_threshold = {:.4} ({:.2}%) at mu={}, eta={}",
                    r.epsilon_threshold,
                    100.0 * r.epsilon_threshold,
                    cfg.mu,
                    cfg.eta
                ),
                code: EXIT_OK,
            })
        }
        Mode::Sweep => {
            let report = sweep(&cfg.grid.mu_values, &cfg.grid.eta_values)?;
            let failures = report.failures();
            let mut summary = format!("{} cells, {} failed", report.cells.len(), failures.len());
            for f in &failures {
                let err = f.result.as_ref().expect_err("failed cell");
                summary.push_str(&format!("\n  mu={}, eta={}: {}", f.mu, f.eta, err.message));
            }
            let code = if failures.is_empty() { EXIT_OK } else { EXIT_SOLVER };
            Ok(RunOutput {
                data: emit(fmt, || sweep_csv(&report), &report),
                summary,
                code,
            })
        }
        Mode::Simulate => {
            let key = keygen(cfg.simulation.key_length, cfg.seed).map_err(validation)?;
            let r = run_protocol(&key, &cfg.channel_params(), cfg.simulation.cycles, cfg.seed).map_err(validation)?;
            let summary = match (r.epsilon, r.epsilon_stderr) {
                (Some(e), Some(s)) => format!(
                    "epsilon = {:.4}% ± {:.4}% over {} sifted of {} pulses",
                    100.0 * e,
                    100.0 * s,
                    r.sifted_count,
                    r.pulses
                ),
                _ => "DEGENERATE: no sifted detections".into(),
            };
            Ok(RunOutput {
                data: emit(
                    fmt,
                    || format!("{}\n{}\n", crate::protocol::RunReport::CSV_HEADER, r.csv_row()),
                    &r,
                ),
                summary,
                code: EXIT_OK,
            })
        }
        Mode::Verdict => {
            let th = compute_threshold(cfg.mu, cfg.eta)?;
            let v = match (cfg.verdict.epsilon, cfg.verdict.epsilon_stderr) {
                (Some(e), Some(s)) => verdict_from_values(Some(e), Some(s), th.epsilon_threshold, cfg.verdict.k),
                _ => {
                    let key = keygen(cfg.simulation.key_length, cfg.seed).map_err(validation)?;
                    let r = run_protocol(&key, &cfg.channel_params(), cfg.simulation.cycles, cfg.seed)
                        .map_err(validation)?;
                    verdict(&r, &th, cfg.verdict.k).map_err(validation)?
                }
            };
            Ok(RunOutput {
                data: emit(fmt, || verdict_csv(cfg.mu, cfg.eta, &v), &v),
                summary: format!("{} (threshold {:.4})", v.summary(), th.epsilon_threshold),
                code: EXIT_OK,
            })
        }
        Mode::Horizon => {
            let h = secure_storage_horizon(&cfg.horizon_params()).map_err(|e| match e {
                crate::horizon::HorizonError::Threshold(t) => CliError::from(t),
                other => validation(other),
            })?;
            let summary = if h.secure_anywhere {
                format!("secure storage horizon = {:.1} μs", h.horizon_us)
            } else {
                "no secure storage time".into()
            };
            Ok(RunOutput {
                data: emit(fmt, || horizon_csv(&h), &h),
                summary,
                code: EXIT_OK,
            })
        }
        Mode::PlotData => {
            let mus = match cfg.plot.style {
                PlotStyle::ThresholdVsMu => cfg.grid.mu_values.clone(),
                PlotStyle::SecureRegion => vec![cfg.mu],
            };
            let report = sweep(&mus, &cfg.grid.eta_values)?;
            let grid = report.into_grid().map_err(|failed| CliError {
                code: EXIT_SOLVER,
                message: format!(
                    "incomplete sweep, failed cells: {}",
                    failed
                        .iter()
                        .map(|c| format!("(mu={}, eta={})", c.mu, c.eta))
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            })?;
            let data = plot_data(&grid, cfg.plot.style).map_err(validation)?;
            Ok(RunOutput {
                data: emit(fmt, || plot_csv(&data), &data),
                summary: format!("{} cells", grid.iter().count()),
                code: EXIT_OK,
            })
        }
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = resolve_config(&cli)
        .map_err(CliError::from)
        .and_then(|cfg| run(cli.command.mode(), &cfg).map(|out| (cfg, out)));
    match result {
        Ok((cfg, out)) => {
            match &cfg.output_path {
                Some(path) => {
                    if let Err(e) = write_atomic(path, &out.data) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_IO;
                    }
                }
                None => print!("{}", out.data),
            }
            eprintln!("{}", out.summary);
            out.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
