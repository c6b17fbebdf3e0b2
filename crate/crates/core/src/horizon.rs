//! Longest storage time that keeps the observed error under the threshold.
//!
//! Memory efficiency decays with storage time while background clicks stay
//! constant, so the error rate climbs as the threshold falls. The horizon is
//! found by scanning a fixed time grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::threshold::{ThresholdCache, ThresholdError};

/// Below this efficiency no error rate is secure, so the scan stops.
pub const NO_CLONING_EFFICIENCY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HorizonError {
    #[error("{field} must be {expected}, got {value}")]
    InvalidParameter {
        field: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

/// Shape of the efficiency decay `eta(t) = eta_peak f(t)` for lifetime `tau`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DecayModel {
    /// `exp(-t^2 / tau^2)`
    #[default]
    Gaussian,
    /// `exp(-2 t^2 / tau^2)`: efficiency reaches `1/e^2` at `tau`.
    GaussianE2,
    /// `exp(-2 t / tau)`
    Exponential,
}

impl DecayModel {
    pub fn profile(self, t_us: f64, tau_us: f64) -> f64 {
        let x = t_us / tau_us;
        match self {
            DecayModel::Gaussian => (-x * x).exp(),
            DecayModel::GaussianE2 => (-2.0 * x * x).exp(),
            DecayModel::Exponential => (-2.0 * x).exp(),
        }
    }

    /// `eta(t)` scaled so that `eta(reference_time) = eta_ref`, capped at 1.
    pub fn efficiency(self, t_us: f64, tau_us: f64, eta_ref: f64, reference_time_us: f64) -> f64 {
        (eta_ref * self.profile(t_us, tau_us) / self.profile(reference_time_us, tau_us)).min(1.0)
    }
}

/// Error rate with signal proportional to `eta` and a constant background:
/// `eps(eta) = (b/2 + p eta) / (eta + b)`, signal rate normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub encoding_error: f64,
    pub background: f64,
}

impl NoiseModel {
    pub fn epsilon(&self, eta: f64) -> f64 {
        (0.5 * self.background + self.encoding_error * eta) / (eta + self.background)
    }

    /// Background that yields `epsilon_ref` at `eta_ref`.
    pub fn calibrate(eta_ref: f64, epsilon_ref: f64, encoding_error: f64) -> Result<Self, HorizonError> {
        check_range("eta_ref", eta_ref, 0.0, 1.0, "in (0, 1]")?;
        check_range("encoding_error", encoding_error, -f64::MIN_POSITIVE, 0.5, "in [0, 0.5)")?;
        if !(epsilon_ref >= encoding_error && epsilon_ref < 0.5) {
            return Err(HorizonError::InvalidParameter {
                field: "epsilon_ref",
                expected: "in [encoding_error, 0.5)",
                value: epsilon_ref,
            });
        }
        Ok(Self {
            encoding_error,
            background: (epsilon_ref - encoding_error) * eta_ref / (0.5 - epsilon_ref),
        })
    }
}

fn check_range(field: &'static str, value: f64, lo: f64, hi: f64, expected: &'static str) -> Result<(), HorizonError> {
    if value.is_finite() && value > lo && value <= hi {
        Ok(())
    } else {
        Err(HorizonError::InvalidParameter { field, expected, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonParams {
    pub mu: f64,
    /// Efficiency measured at `reference_time_us`.
    pub eta_ref: f64,
    /// Decay time constant `tau` in microseconds.
    pub lifetime_us: f64,
    /// Error rate measured at `reference_time_us`.
    pub epsilon_ref: f64,
    pub reference_time_us: f64,
    /// Error rate without storage, i.e. the background-free floor.
    pub encoding_error: f64,
    pub decay: DecayModel,
    pub step_us: f64,
}

impl Default for HorizonParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            eta_ref: 0.77,
            lifetime_us: 15.0,
            epsilon_ref: 0.0078,
            reference_time_us: 1.0,
            encoding_error: 0.0036,
            decay: DecayModel::Gaussian,
            step_us: 0.1,
        }
    }
}

impl HorizonParams {
    pub fn validate(&self) -> Result<(), HorizonError> {
        check_range("mu", self.mu, 0.0, crate::states::MAX_MEAN_PHOTON_NUMBER, "in (0, 20]")?;
        check_range("lifetime_us", self.lifetime_us, 0.0, f64::MAX, "positive")?;
        check_range(
            "reference_time_us",
            self.reference_time_us,
            -f64::MIN_POSITIVE,
            f64::MAX,
            "non-negative",
        )?;
        check_range("step_us", self.step_us, 0.0, f64::MAX, "positive")?;
        NoiseModel::calibrate(self.eta_ref, self.epsilon_ref, self.encoding_error).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonSample {
    pub time_us: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub epsilon_threshold: f64,
    pub secure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    /// Largest scanned time that is secure; 0 when none is.
    pub horizon_us: f64,
    /// False when no scanned time is secure.
    pub secure_anywhere: bool,
    pub noise: NoiseModel,
    pub samples: Vec<HorizonSample>,
}

/// Scans `t = 0, step, 2 step, ...` while `eta(t)` stays above one half.
pub fn scan_horizon(
    mu: f64,
    eta_at: impl Fn(f64) -> f64 + Sync,
    noise: NoiseModel,
    step_us: f64,
    cache: &ThresholdCache,
) -> Result<HorizonResult, HorizonError> {
    let mut times = Vec::new();
    for k in 0.. {
        let t = k as f64 * step_us;
        if eta_at(t) <= NO_CLONING_EFFICIENCY || k > 1_000_000 {
            break;
        }
        times.push(t);
    }
    let samples = times
        .par_iter()
        .map(|&t| {
            let eta = eta_at(t);
            let epsilon = noise.epsilon(eta);
            let th = cache.get(mu, eta)?.epsilon_threshold;
            Ok(HorizonSample {
                time_us: t,
                eta,
                epsilon,
                epsilon_threshold: th,
                secure: epsilon < th,
            })
        })
        .collect::<Result<Vec<_>, ThresholdError>>()?;
    let last = samples.iter().rev().find(|s| s.secure).map(|s| s.time_us);
    Ok(HorizonResult {
        horizon_us: last.unwrap_or(0.0),
        secure_anywhere: last.is_some(),
        noise,
        samples,
    })
}

pub fn secure_storage_horizon(params: &HorizonParams) -> Result<HorizonResult, HorizonError> {
    secure_storage_horizon_cached(params, &ThresholdCache::new())
}

pub fn secure_storage_horizon_cached(
    params: &HorizonParams,
    cache: &ThresholdCache,
) -> Result<HorizonResult, HorizonError> {
    params.validate()?;
    let noise = NoiseModel::calibrate(params.eta_ref, params.epsilon_ref, params.encoding_error)?;
    let p = *params;
    scan_horizon(
        p.mu,
        move |t| p.decay.efficiency(t, p.lifetime_us, p.eta_ref, p.reference_time_us),
        noise,
        p.step_us,
        cache,
    )
}
