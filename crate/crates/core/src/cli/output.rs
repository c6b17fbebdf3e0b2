//! CSV and JSON emitters. Reals in CSV use 12 significant digits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PlotStyle;
use crate::horizon::HorizonResult;
use crate::protocol::Verdict;
use crate::threshold::{status_name, SweepGrid, SweepReport, ThresholdResult};

pub fn fmt_real(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub const THRESHOLD_CSV_HEADER: &str = "mu,eta,epsilon_threshold,raw_objective,normalization,gap,status";

pub fn threshold_csv(r: &ThresholdResult) -> String {
    format!(
        "{THRESHOLD_CSV_HEADER}\n{},{},{},{},{},{},{}\n",
        fmt_real(r.mu()),
        fmt_real(r.eta()),
        fmt_real(r.epsilon_threshold),
        fmt_real(r.raw_objective),
        fmt_real(r.normalization),
        fmt_real(r.solution.gap),
        r.solution.status_name()
    )
}

pub const SWEEP_CSV_HEADER: &str = "mu,eta,epsilon_threshold,raw_objective,gap,status";

/// One row per cell in `(eta, mu)` order; failed cells leave the numeric
/// columns empty.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for c in &report.cells {
        let (eps, raw, gap, status) = match &c.result {
            Ok(r) => (
                fmt_real(r.epsilon_threshold),
                fmt_real(r.raw_objective),
                fmt_real(r.solution.gap),
                r.solution.status_name().to_string(),
            ),
            Err(f) => (
                String::new(),
                String::new(),
                String::new(),
                f.status.map(status_name).unwrap_or("ERROR").to_string(),
            ),
        };
        out.push_str(&format!(
            "{},{},{eps},{raw},{gap},{status}\n",
            fmt_real(c.mu),
            fmt_real(c.eta)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub eta: f64,
    pub epsilon_threshold: Option<f64>,
    pub raw_objective: Option<f64>,
    pub gap: Option<f64>,
    pub status: String,
}

/// Parses [`sweep_csv`] output.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_CSV_HEADER) {
        return Err("missing sweep header".into());
    }
    let real = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { real(s).map(Some) };
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("expected 6 fields: {line}"));
            }
            Ok(SweepRow {
                mu: real(f[0])?,
                eta: real(f[1])?,
                epsilon_threshold: opt(f[2])?,
                raw_objective: opt(f[3])?,
                gap: opt(f[4])?,
                status: f[5].to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub eta: f64,
    pub mu: Vec<f64>,
    pub epsilon_threshold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "snake_case")]
pub enum PlotData {
    /// One series per efficiency.
    ThresholdVsMu { series: Vec<PlotSeries> },
    /// Threshold versus efficiency at one mean photon number; errors below
    /// the curve are secure.
    SecureRegion {
        mu: f64,
        eta: Vec<f64>,
        epsilon_threshold: Vec<f64>,
    },
}

/// Plot-ready data from a complete sweep. `SecureRegion` needs a grid with
/// a single mean photon number.
pub fn plot_data(grid: &SweepGrid, style: PlotStyle) -> Result<PlotData, String> {
    match style {
        PlotStyle::ThresholdVsMu => Ok(PlotData::ThresholdVsMu {
            series: grid
                .eta_values
                .iter()
                .zip(&grid.results)
                .map(|(&eta, row)| PlotSeries {
                    eta,
                    mu: grid.mu_values.clone(),
                    epsilon_threshold: row.iter().map(|r| r.epsilon_threshold).collect(),
                })
                .collect(),
        }),
        PlotStyle::SecureRegion => {
            if grid.mu_values.len() != 1 {
                return Err(format!(
                    "secure region needs one mu value, got {}",
                    grid.mu_values.len()
                ));
            }
            Ok(PlotData::SecureRegion {
                mu: grid.mu_values[0],
                eta: grid.eta_values.clone(),
                epsilon_threshold: grid.results.iter().map(|row| row[0].epsilon_threshold).collect(),
            })
        }
    }
}

pub fn plot_csv(data: &PlotData) -> String {
    match data {
        PlotData::ThresholdVsMu { series } => {
            let mut out = String::from("eta,mu,epsilon_threshold\n");
            for s in series {
                for (mu, e) in s.mu.iter().zip(&s.epsilon_threshold) {
                    out.push_str(&format!("{},{},{}\n", fmt_real(s.eta), fmt_real(*mu), fmt_real(*e)));
                }
            }
            out
        }
        PlotData::SecureRegion {
            mu,
            eta,
            epsilon_threshold,
        } => {
            let mut out = String::from("mu,eta,epsilon_threshold\n");
            for (h, e) in eta.iter().zip(epsilon_threshold) {
                out.push_str(&format!("{},{},{}\n", fmt_real(*mu), fmt_real(*h), fmt_real(*e)));
            }
            out
        }
    }
}

pub fn horizon_csv(r: &HorizonResult) -> String {
    let mut out = String::from("time_us,eta,epsilon,epsilon_threshold,secure\n");
    for s in &r.samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_real(s.time_us),
            fmt_real(s.eta),
            fmt_real(s.epsilon),
            fmt_real(s.epsilon_threshold),
            s.secure
        ));
    }
    out
}

pub fn verdict_csv(mu: f64, eta: f64, v: &Verdict) -> String {
    format!(
        "mu,eta,epsilon,epsilon_stderr,epsilon_threshold,margin_sigma,k,verdict\n{},{},{},{},{},{},{},{}\n",
        fmt_real(mu),
        fmt_real(eta),
        fmt_opt(v.epsilon),
        fmt_opt(v.epsilon_stderr),
        fmt_real(v.epsilon_threshold),
        fmt_opt(v.margin_sigma),
        fmt_real(v.k),
        v.status.name()
    )
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}
