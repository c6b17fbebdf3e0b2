//! Monte-Carlo simulation of the bank / memory / vendor / verification cycle.
//!
//! Randomness comes from ChaCha8 with one stream per pulse: pulse `i` of the
//! whole run (cycle-major) draws from stream `i + 1` of the run seed, and key
//! generation uses stream 0. Results therefore do not depend on how cycles
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::horizon::DecayModel;
use crate::states::{StateIndex, MAX_MEAN_PHOTON_NUMBER};
use crate::threshold::ThresholdResult;

pub const DEFAULT_KEY_LENGTH: usize = 28;
pub const DEFAULT_CYCLES: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("{field} must be {expected}, got {value}")]
    InvalidParameter {
        field: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("report was simulated at mu={report} but the threshold is for mu={threshold}")]
    MuMismatch { report: f64, threshold: f64 },
    #[error("calibration failed: {0}")]
    Calibration(String),
}

fn invalid(field: &'static str, expected: &'static str, value: f64) -> ProtocolError {
    ProtocolError::InvalidParameter { field, expected, value }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Basis {
    Linear,
    Circular,
}

impl Basis {
    fn index(self) -> usize {
        match self {
            Basis::Linear => 0,
            Basis::Circular => 1,
        }
    }

    fn random(rng: &mut impl Rng) -> Self {
        if rng.random::<bool>() {
            Basis::Circular
        } else {
            Basis::Linear
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub basis: Basis,
    pub bit: u8,
}

impl KeyEntry {
    /// H, sigma+, V, sigma- are states 0..3.
    pub fn state_index(self) -> StateIndex {
        let k = match (self.basis, self.bit) {
            (Basis::Linear, 0) => 0,
            (Basis::Circular, 0) => 1,
            (Basis::Linear, _) => 2,
            (Basis::Circular, _) => 3,
        };
        StateIndex::new(k).expect("k < 4")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    pub entries: Vec<KeyEntry>,
}

impl SecretKey {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Uniform i.i.d. basis and bit per entry, drawn from stream 0 of `seed`.
pub fn keygen(length: usize, seed: u64) -> Result<SecretKey, ProtocolError> {
    if length == 0 {
        return Err(invalid("length", "at least 1", 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let entries = (0..length)
        .map(|_| KeyEntry {
            basis: Basis::random(&mut rng),
            bit: rng.random_range(0..2),
        })
        .collect();
    Ok(SecretKey { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub mu: f64,
    /// Probability that a pulse is prepared in the orthogonal state.
    pub encoding_error: f64,
    /// Per-photon survival through storage and retrieval, before decay.
    pub memory_efficiency: f64,
    /// Per-detector probability of a background click in one window.
    pub background_click_prob: f64,
    pub storage_enabled: bool,
    pub storage_time_us: f64,
    pub lifetime_tau_us: f64,
    pub decay: DecayModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            encoding_error: 0.005,
            memory_efficiency: 1.0,
            background_click_prob: 0.0,
            storage_enabled: false,
            storage_time_us: 1.0,
            lifetime_tau_us: 15.0,
            decay: DecayModel::Gaussian,
        }
    }
}

fn check_probability(field: &'static str, v: f64) -> Result<(), ProtocolError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, "in [0, 1]", v))
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.mu.is_finite() && self.mu >= 0.0 && self.mu <= MAX_MEAN_PHOTON_NUMBER) {
            return Err(invalid("mu", "in [0, 20]", self.mu));
        }
        check_probability("encoding_error", self.encoding_error)?;
        check_probability("memory_efficiency", self.memory_efficiency)?;
        check_probability("background_click_prob", self.background_click_prob)?;
        if !(self.storage_time_us.is_finite() && self.storage_time_us >= 0.0) {
            return Err(invalid("storage_time_us", "non-negative", self.storage_time_us));
        }
        if !(self.lifetime_tau_us.is_finite() && self.lifetime_tau_us > 0.0) {
            return Err(invalid("lifetime_tau_us", "positive", self.lifetime_tau_us));
        }
        Ok(())
    }

    /// Per-photon survival probability including storage decay.
    pub fn effective_efficiency(&self) -> f64 {
        let decay = if self.storage_enabled {
            self.decay.profile(self.storage_time_us, self.lifetime_tau_us)
        } else {
            1.0
        };
        self.memory_efficiency * decay
    }

    /// Sets `memory_efficiency` so that [`Self::effective_efficiency`] equals `eta`.
    pub fn with_effective_efficiency(mut self, eta: f64) -> Self {
        self.memory_efficiency = 1.0;
        self.memory_efficiency = (eta / self.effective_efficiency()).min(1.0);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Bit0,
    Bit1,
    NoDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub pulse_index: u64,
    pub sent_k: usize,
    pub vendor_basis: Basis,
    pub click0: bool,
    pub click1: bool,
    pub outcome: Outcome,
    pub sifted: bool,
    pub error: bool,
}

/// The generator for pulse `pulse_index` of a run seeded with `seed`.
pub fn pulse_rng(seed: u64, pulse_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pulse_index + 1);
    rng
}

/// One pulse through preparation, storage and the vendor's measurement.
pub fn simulate_pulse(
    pulse_index: u64,
    entry: KeyEntry,
    params: &ChannelParams,
    vendor_basis: Basis,
    rng: &mut impl Rng,
) -> TransactionRecord {
    let flipped = rng.random_bool(params.encoding_error);
    let photons = if params.mu > 0.0 {
        Poisson::new(params.mu).expect("mu validated").sample(rng) as u64
    } else {
        0
    };
    let survival = params.effective_efficiency();
    let matched = vendor_basis == entry.basis;
    let prepared_bit = entry.bit ^ u8::from(flipped);
    let mut clicks = [false, false];
    for _ in 0..photons {
        if !rng.random_bool(survival) {
            continue;
        }
        let detector = if matched {
            prepared_bit as usize
        } else {
            usize::from(rng.random::<bool>())
        };
        clicks[detector] = true;
    }
    for c in &mut clicks {
        if rng.random_bool(params.background_click_prob) {
            *c = true;
        }
    }
    let outcome = match clicks {
        [false, false] => Outcome::NoDetection,
        [true, false] => Outcome::Bit0,
        [false, true] => Outcome::Bit1,
        [true, true] => {
            if rng.random::<bool>() {
                Outcome::Bit1
            } else {
                Outcome::Bit0
            }
        }
    };
    let sifted = matched && outcome != Outcome::NoDetection;
    let measured_bit = u8::from(outcome == Outcome::Bit1);
    TransactionRecord {
        pulse_index,
        sent_k: entry.state_index().get(),
        vendor_basis,
        click0: clicks[0],
        click1: clicks[1],
        outcome,
        sifted,
        error: sifted && measured_bit != entry.bit,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Ok,
    /// No sifted detection, so no error rate.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: ChannelParams,
    pub seed: u64,
    pub key_length: usize,
    pub cycles: usize,
    pub pulses: u64,
    pub detected_count: u64,
    pub sifted_count: u64,
    pub error_count: u64,
    /// Unweighted mean of the per-basis error rates present.
    pub epsilon: Option<f64>,
    /// `sqrt(epsilon (1 - epsilon) / sifted_count)`.
    pub epsilon_stderr: Option<f64>,
    /// `error_count / sifted_count`.
    pub pooled_epsilon: Option<f64>,
    /// Linear, circular.
    pub per_basis_epsilon: [Option<f64>; 2],
    pub per_basis_sifted: [u64; 2],
    pub per_basis_errors: [u64; 2],
    pub status: RunStatus,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    detected: u64,
    sifted: [u64; 2],
    errors: [u64; 2],
}

impl Counts {
    fn add(mut self, o: Counts) -> Counts {
        self.detected += o.detected;
        for b in 0..2 {
            self.sifted[b] += o.sifted[b];
            self.errors[b] += o.errors[b];
        }
        self
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Runs `cycles` passes over `key`, with the vendor's basis drawn uniformly
/// per pulse.
pub fn run_protocol(
    key: &SecretKey,
    params: &ChannelParams,
    cycles: usize,
    seed: u64,
) -> Result<RunReport, ProtocolError> {
    params.validate()?;
    if cycles == 0 {
        return Err(invalid("cycles", "at least 1", 0.0));
    }
    if key.is_empty() {
        return Err(invalid("key length", "at least 1", 0.0));
    }
    let n = key.len() as u64;
    let counts = (0..cycles as u64)
        .into_par_iter()
        .map(|cycle| {
            let mut c = Counts::default();
            for (i, &entry) in key.entries.iter().enumerate() {
                let idx = cycle * n + i as u64;
                let mut rng = pulse_rng(seed, idx);
                let vendor = Basis::random(&mut rng);
                let r = simulate_pulse(idx, entry, params, vendor, &mut rng);
                if r.outcome != Outcome::NoDetection {
                    c.detected += 1;
                }
                if r.sifted {
                    c.sifted[entry.basis.index()] += 1;
                    c.errors[entry.basis.index()] += u64::from(r.error);
                }
            }
            c
        })
        .reduce(Counts::default, Counts::add);

    let sifted = counts.sifted[0] + counts.sifted[1];
    let errors = counts.errors[0] + counts.errors[1];
    let per_basis = [
        ratio(counts.errors[0], counts.sifted[0]),
        ratio(counts.errors[1], counts.sifted[1]),
    ];
    let present: Vec<f64> = per_basis.iter().flatten().copied().collect();
    let epsilon = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok(RunReport {
        params: *params,
        seed,
        key_length: key.len(),
        cycles,
        pulses: cycles as u64 * n,
        detected_count: counts.detected,
        sifted_count: sifted,
        error_count: errors,
        epsilon,
        epsilon_stderr: epsilon.map(|e| (e * (1.0 - e) / sifted as f64).sqrt()),
        pooled_epsilon: ratio(errors, sifted),
        per_basis_epsilon: per_basis,
        per_basis_sifted: counts.sifted,
        per_basis_errors: counts.errors,
        status: if sifted == 0 {
            RunStatus::Degenerate
        } else {
            RunStatus::Ok
        },
    })
}

impl RunReport {
    pub const CSV_HEADER: &'static str = "mu,encoding_error,memory_efficiency,background_click_prob,storage_enabled,storage_time_us,seed,key_length,cycles,pulses,detected_count,sifted_count,error_count,epsilon,epsilon_stderr,pooled_epsilon,epsilon_linear,epsilon_circular,status";

    /// One CSV data row matching [`Self::CSV_HEADER`]; reals use 12
    /// significant digits and undefined rates are empty.
    pub fn csv_row(&self) -> String {
        let f = |v: f64| format!("{v:.11e}");
        let o = |v: Option<f64>| v.map(f).unwrap_or_default();
        let p = &self.params;
        [
            f(p.mu),
            f(p.encoding_error),
            f(p.memory_efficiency),
            f(p.background_click_prob),
            p.storage_enabled.to_string(),
            f(p.storage_time_us),
            self.seed.to_string(),
            self.key_length.to_string(),
            self.cycles.to_string(),
            self.pulses.to_string(),
            self.detected_count.to_string(),
            self.sifted_count.to_string(),
            self.error_count.to_string(),
            o(self.epsilon),
            o(self.epsilon_stderr),
            o(self.pooled_epsilon),
            o(self.per_basis_epsilon[0]),
            o(self.per_basis_epsilon[1]),
            match self.status {
                RunStatus::Ok => "OK".into(),
                RunStatus::Degenerate => "DEGENERATE".into(),
            },
        ]
        .join(",")
    }
}

/// Expected sifted error rate of the channel model.
///
/// With `s` the effective efficiency, the signal detector fires with
/// `q = 1 - exp(-mu s)(1 - b)` and the other one with `b`; an encoding flip
/// swaps the two and double clicks are a coin toss.
pub fn expected_error_rate(params: &ChannelParams) -> f64 {
    let b = params.background_click_prob;
    let p = params.encoding_error;
    let q = 1.0 - (-params.mu * params.effective_efficiency()).exp() * (1.0 - b);
    let wrong_if_clean = (1.0 - q) * b + 0.5 * q * b;
    let wrong_if_flipped = q * (1.0 - b) + 0.5 * q * b;
    ((1.0 - p) * wrong_if_clean + p * wrong_if_flipped) / (1.0 - (1.0 - q) * (1.0 - b))
}

/// Probability that at least one detector fires: `1 - exp(-mu s)(1 - b)^2`.
pub fn detection_probability(params: &ChannelParams) -> f64 {
    let b = params.background_click_prob;
    1.0 - (-params.mu * params.effective_efficiency()).exp() * (1.0 - b) * (1.0 - b)
}

/// Least-squares encoding error against `(mu, epsilon)` anchors, holding the
/// other parameters of `template` fixed. The model is affine in the encoding
/// error, so the fit is closed-form; without background it is the mean.
pub fn calibrate_encoding_error(template: &ChannelParams, anchors: &[(f64, f64)]) -> Result<f64, ProtocolError> {
    if anchors.is_empty() {
        return Err(ProtocolError::Calibration("no anchors".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(mu, eps) in anchors {
        let at = |p: f64| {
            expected_error_rate(&ChannelParams {
                mu,
                encoding_error: p,
                ..*template
            })
        };
        let a = at(0.0);
        let slope = at(1.0) - a;
        num += slope * (eps - a);
        den += slope * slope;
    }
    if den <= 0.0 {
        return Err(ProtocolError::Calibration(
            "anchors do not constrain the encoding error".into(),
        ));
    }
    let p = num / den;
    check_probability("encoding_error", p)?;
    Ok(p)
}

/// Background click probability giving `target` expected error rate, by
/// bisection (the rate increases with background below one half).
pub fn calibrate_background(template: &ChannelParams, target: f64) -> Result<f64, ProtocolError> {
    let at = |b: f64| {
        expected_error_rate(&ChannelParams {
            background_click_prob: b,
            ..*template
        })
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    if !(at(lo) <= target && target < at(hi)) {
        return Err(ProtocolError::Calibration(format!(
            "target {target} outside [{}, {})",
            at(lo),
            at(hi)
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictStatus {
    Secure,
    Insecure,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub epsilon: Option<f64>,
    pub epsilon_stderr: Option<f64>,
    pub epsilon_threshold: f64,
    /// `(threshold - epsilon) / stderr`.
    pub margin_sigma: Option<f64>,
    /// Secure requires `epsilon + k stderr < threshold`.
    pub k: f64,
}

impl VerdictStatus {
    pub fn name(self) -> &'static str {
        match self {
            VerdictStatus::Secure => "SECURE",
            VerdictStatus::Insecure => "INSECURE",
            VerdictStatus::Undefined => "UNDEFINED",
        }
    }
}

impl Verdict {
    /// `SECURE, margin ≈ 23σ` style summary.
    pub fn summary(&self) -> String {
        match (self.status, self.margin_sigma) {
            (VerdictStatus::Undefined, _) | (_, None) => self.status.name().into(),
            (s, Some(m)) => format!("{}, margin ≈ {m:.0}σ", s.name()),
        }
    }
}

/// Compares a measured error rate against a threshold.
pub fn verdict_from_values(epsilon: Option<f64>, stderr: Option<f64>, epsilon_threshold: f64, k: f64) -> Verdict {
    let (status, margin_sigma) = match (epsilon, stderr) {
        (Some(e), Some(s)) if e.is_finite() && s.is_finite() => {
            let secure = e + k * s < epsilon_threshold;
            let margin = (s > 0.0).then(|| (epsilon_threshold - e) / s);
            (
                if secure {
                    VerdictStatus::Secure
                } else {
                    VerdictStatus::Insecure
                },
                margin,
            )
        }
        _ => (VerdictStatus::Undefined, None),
    };
    Verdict {
        status,
        epsilon,
        epsilon_stderr: stderr,
        epsilon_threshold,
        margin_sigma,
        k,
    }
}

pub fn verdict(report: &RunReport, threshold: &ThresholdResult, k: f64) -> Result<Verdict, ProtocolError> {
    let mu = threshold.mu();
    if (report.params.mu - mu).abs() > 1e-12 * mu.max(1.0) {
        return Err(ProtocolError::MuMismatch {
            report: report.params.mu,
            threshold: mu,
        });
    }
    if report.status == RunStatus::Degenerate {
        return Ok(verdict_from_values(None, None, threshold.epsilon_threshold, k));
    }
    Ok(verdict_from_values(
        report.epsilon,
        report.epsilon_stderr,
        threshold.epsilon_threshold,
        k,
    ))
}
