//! Run configuration: a JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::horizon::{DecayModel, HorizonParams};
use crate::protocol::ChannelParams;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "WIESNER_CONFIG";

/// The config schema shipped with the crate.
pub const CONFIG_SCHEMA: &str = include_str!("../../config.schema.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Threshold,
    Sweep,
    Simulate,
    Verdict,
    Horizon,
    PlotData,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PlotStyle {
    /// One threshold-versus-mu series per efficiency.
    #[default]
    ThresholdVsMu,
    /// Threshold versus efficiency at the configured mu.
    SecureRegion,
}

/// Channel settings for simulations; `mu` comes from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub encoding_error: f64,
    pub memory_efficiency: f64,
    pub background_click_prob: f64,
    pub storage_enabled: bool,
    pub storage_time_us: f64,
    pub lifetime_tau_us: f64,
    pub decay: DecayModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let p = ChannelParams::default();
        Self {
            encoding_error: p.encoding_error,
            memory_efficiency: p.memory_efficiency,
            background_click_prob: p.background_click_prob,
            storage_enabled: p.storage_enabled,
            storage_time_us: p.storage_time_us,
            lifetime_tau_us: p.lifetime_tau_us,
            decay: p.decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub mu_values: Vec<f64>,
    pub eta_values: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            mu_values: vec![0.5, 1.0, 1.5, 2.0],
            eta_values: vec![0.6, 0.7, 0.77, 0.9],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub key_length: usize,
    pub cycles: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            key_length: crate::protocol::DEFAULT_KEY_LENGTH,
            cycles: crate::protocol::DEFAULT_CYCLES,
        }
    }
}

/// When `epsilon` and `epsilon_stderr` are both set the verdict uses them
/// instead of running a simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictConfig {
    pub k: f64,
    pub epsilon: Option<f64>,
    pub epsilon_stderr: Option<f64>,
}

/// Storage-horizon settings; `mu` comes from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonConfig {
    pub eta_ref: f64,
    pub lifetime_us: f64,
    pub epsilon_ref: f64,
    pub reference_time_us: f64,
    pub encoding_error: f64,
    pub decay: DecayModel,
    pub step_us: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        let h = HorizonParams::default();
        Self {
            eta_ref: h.eta_ref,
            lifetime_us: h.lifetime_us,
            epsilon_ref: h.epsilon_ref,
            reference_time_us: h.reference_time_us,
            encoding_error: h.encoding_error,
            decay: h.decay,
            step_us: h.step_us,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotConfig {
    pub style: PlotStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Informational; the subcommand decides what runs.
    pub mode: Option<Mode>,
    pub mu: f64,
    pub eta: f64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub channel: ChannelConfig,
    pub grid: GridConfig,
    pub simulation: SimulationConfig,
    pub verdict: VerdictConfig,
    pub horizon: HorizonConfig,
    pub plot: PlotConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            mu: 1.0,
            eta: 0.77,
            seed: 2024,
            output_path: None,
            output_format: OutputFormat::Csv,
            channel: ChannelConfig::default(),
            grid: GridConfig::default(),
            simulation: SimulationConfig::default(),
            verdict: VerdictConfig::default(),
            horizon: HorizonConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

fn check(field: &str, v: f64, ok: bool, expected: &str) -> Result<(), ConfigError> {
    if v.is_finite() && ok {
        Ok(())
    } else {
        Err(invalid(field, format!("must be {expected}, got {v}")))
    }
}

fn check_mu(field: &str, v: f64) -> Result<(), ConfigError> {
    check(
        field,
        v,
        v > 0.0 && v <= crate::states::MAX_MEAN_PHOTON_NUMBER,
        "in (0, 20]",
    )
}

fn check_eta(field: &str, v: f64) -> Result<(), ConfigError> {
    check(field, v, v > 0.0 && v <= 1.0, "in (0, 1]")
}

fn check_prob(field: &str, v: f64) -> Result<(), ConfigError> {
    check(field, v, (0.0..=1.0).contains(&v), "in [0, 1]")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn channel_params(&self) -> ChannelParams {
        let c = &self.channel;
        ChannelParams {
            mu: self.mu,
            encoding_error: c.encoding_error,
            memory_efficiency: c.memory_efficiency,
            background_click_prob: c.background_click_prob,
            storage_enabled: c.storage_enabled,
            storage_time_us: c.storage_time_us,
            lifetime_tau_us: c.lifetime_tau_us,
            decay: c.decay,
        }
    }

    pub fn horizon_params(&self) -> HorizonParams {
        let h = &self.horizon;
        HorizonParams {
            mu: self.mu,
            eta_ref: h.eta_ref,
            lifetime_us: h.lifetime_us,
            epsilon_ref: h.epsilon_ref,
            reference_time_us: h.reference_time_us,
            encoding_error: h.encoding_error,
            decay: h.decay,
            step_us: h.step_us,
        }
    }

    /// Checks everything `mode` will use, before any computation.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        check_mu("mu", self.mu)?;
        match mode {
            Mode::Threshold => check_eta("eta", self.eta),
            Mode::Sweep | Mode::PlotData => self.validate_grid(mode),
            Mode::Simulate => self.validate_simulation(),
            Mode::Verdict => {
                check_eta("eta", self.eta)?;
                check("verdict.k", self.verdict.k, true, "finite")?;
                match (self.verdict.epsilon, self.verdict.epsilon_stderr) {
                    (Some(e), Some(s)) => {
                        check("verdict.epsilon", e, (0.0..=1.0).contains(&e), "in [0, 1]")?;
                        check("verdict.epsilon_stderr", s, s > 0.0, "positive")
                    }
                    (None, None) => self.validate_simulation(),
                    (Some(_), None) => Err(invalid(
                        "verdict.epsilon_stderr",
                        "required when verdict.epsilon is set",
                    )),
                    (None, Some(_)) => Err(invalid(
                        "verdict.epsilon",
                        "required when verdict.epsilon_stderr is set",
                    )),
                }
            }
            Mode::Horizon => self.validate_horizon(),
        }
    }

    fn validate_grid(&self, mode: Mode) -> Result<(), ConfigError> {
        let secure_region = mode == Mode::PlotData && self.plot.style == PlotStyle::SecureRegion;
        if !secure_region {
            if self.grid.mu_values.is_empty() {
                return Err(invalid("grid.mu_values", "must not be empty"));
            }
            for (i, &m) in self.grid.mu_values.iter().enumerate() {
                check_mu(&format!("grid.mu_values[{i}]"), m)?;
            }
        }
        if self.grid.eta_values.is_empty() {
            return Err(invalid("grid.eta_values", "must not be empty"));
        }
        for (i, &e) in self.grid.eta_values.iter().enumerate() {
            check_eta(&format!("grid.eta_values[{i}]"), e)?;
        }
        Ok(())
    }

    fn validate_simulation(&self) -> Result<(), ConfigError> {
        let c = &self.channel;
        check_prob("channel.encoding_error", c.encoding_error)?;
        check_prob("channel.memory_efficiency", c.memory_efficiency)?;
        check_prob("channel.background_click_prob", c.background_click_prob)?;
        check(
            "channel.storage_time_us",
            c.storage_time_us,
            c.storage_time_us >= 0.0,
            "non-negative",
        )?;
        check(
            "channel.lifetime_tau_us",
            c.lifetime_tau_us,
            c.lifetime_tau_us > 0.0,
            "positive",
        )?;
        if self.simulation.key_length == 0 {
            return Err(invalid("simulation.key_length", "must be at least 1"));
        }
        if self.simulation.cycles == 0 {
            return Err(invalid("simulation.cycles", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_horizon(&self) -> Result<(), ConfigError> {
        let h = &self.horizon;
        check_eta("horizon.eta_ref", h.eta_ref)?;
        check("horizon.lifetime_us", h.lifetime_us, h.lifetime_us > 0.0, "positive")?;
        check(
            "horizon.reference_time_us",
            h.reference_time_us,
            h.reference_time_us >= 0.0,
            "non-negative",
        )?;
        check("horizon.step_us", h.step_us, h.step_us > 0.0, "positive")?;
        check(
            "horizon.encoding_error",
            h.encoding_error,
            (0.0..0.5).contains(&h.encoding_error),
            "in [0, 0.5)",
        )?;
        check(
            "horizon.epsilon_ref",
            h.epsilon_ref,
            h.epsilon_ref >= h.encoding_error && h.epsilon_ref < 0.5,
            "in [horizon.encoding_error, 0.5)",
        )
    }
}

/// `key = default` lines for every leaf of the default config.
pub fn config_keys_help() -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            other => out.push(format!("  {prefix} = {other}")),
        }
    }
    let mut lines = Vec::new();
    walk(
        "",
        &serde_json::to_value(RunConfig::default()).expect("serialisable"),
        &mut lines,
    );
    format!(
        "Config keys (JSON file via --config or ${CONFIG_ENV}; flags override):\n{}",
        lines.join("\n")
    )
}
