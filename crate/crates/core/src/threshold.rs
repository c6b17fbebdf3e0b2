//! Security thresholds from the optimal cloning attack.
//!
//! For a mean photon number `mu` and memory efficiency `eta`, the adversary
//! picks a cloning map `J` that keeps both copies' error rates equal and
//! their no-detection rates at most the honest value `exp(-eta mu)`. The
//! smallest error it can reach, divided by the honest detection probability
//! `1 - exp(-eta mu)`, is the threshold: observed error rates below it are
//! secure.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{honest_loss_bound, intercept_resend_choi, tp_constraint_rows, ChoiVariableSpec, OperatorSet};
use crate::sdp::{
    check_certificate_with, solve, CertificateReport, InitialPoint, LinearConstraint, SdpProblem, SdpSolution, Sense,
    SolveOptions, SolveStatus,
};
use crate::states::{poisson_split, MeanPhotonNumber, StateError};

/// Residual bound used when certifying a threshold solve.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Relative duality gap accepted when certifying a threshold solve.
pub const CERTIFICATE_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("efficiency must be in (0, 1], got {0}")]
    InvalidEfficiency(f64),
    #[error("solver returned {} at mu={mu}, eta={eta}: {}", .summary.status_name(), .summary.detail)]
    Solver {
        mu: f64,
        eta: f64,
        summary: Box<SolutionSummary>,
    },
    #[error("{0}")]
    InvalidGrid(String),
}

/// Storage-and-retrieval efficiency in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Efficiency(f64);

impl Efficiency {
    pub fn new(eta: f64) -> Result<Self, ThresholdError> {
        if eta.is_finite() && eta > 0.0 && eta <= 1.0 {
            Ok(Self(eta))
        } else {
            Err(ThresholdError::InvalidEfficiency(eta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Efficiency {
    type Error = ThresholdError;

    fn try_from(eta: f64) -> Result<Self, ThresholdError> {
        Self::new(eta)
    }
}

impl From<Efficiency> for f64 {
    fn from(eta: Efficiency) -> f64 {
        eta.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub mu: MeanPhotonNumber,
    pub eta: Efficiency,
}

impl ThresholdQuery {
    pub fn new(mu: f64, eta: f64) -> Result<Self, ThresholdError> {
        Ok(Self {
            mu: MeanPhotonNumber::new(mu)?,
            eta: Efficiency::new(eta)?,
        })
    }

    /// Honest detection probability `1 - exp(-eta mu)`.
    pub fn normalization(&self) -> f64 {
        -(-self.eta.value() * self.mu.value()).exp_m1()
    }
}

/// The threshold problem for one query, with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct CloningProblem {
    pub query: ThresholdQuery,
    pub operators: OperatorSet,
    pub loss_bound: f64,
    pub problem: SdpProblem,
}

pub fn build_cloning_problem(query: ThresholdQuery) -> CloningProblem {
    let operators = OperatorSet::new(query.mu);
    let loss_bound = honest_loss_bound(query.mu.value(), query.eta.value()).expect("validated query");
    let equalities = tp_constraint_rows(&ChoiVariableSpec::default())
        .into_iter()
        .map(|(a, b)| LinearConstraint::new(a, b))
        .collect();
    let inequalities = vec![
        LinearConstraint::new(operators.e1.sub(&operators.e0), 0.0),
        LinearConstraint::new(operators.l0.clone(), loss_bound),
        LinearConstraint::new(operators.l1.clone(), loss_bound),
    ];
    let problem = SdpProblem::new(operators.e0.clone(), Sense::Min, equalities, inequalities)
        .expect("trace-preservation rows are independent");
    CloningProblem {
        query,
        operators,
        loss_bound,
        problem,
    }
}

/// Solver settings used for threshold instances. The start `X = 1/9` has
/// output partial trace exactly `1_7`.
pub fn threshold_solve_options() -> SolveOptions {
    SolveOptions {
        gap_tol: 1e-9,
        feas_tol: 1e-10,
        initial_point: InitialPoint::Scaled {
            primal: 1.0 / 9.0,
            dual: 1.0,
        },
        ..SolveOptions::default()
    }
}

/// Solver outcome without the 63x63 variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub certificate_passed: bool,
    pub certificate_failures: Vec<String>,
    pub detail: String,
}

impl SolutionSummary {
    fn new(s: &SdpSolution, cert: &CertificateReport) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            primal_value: s.primal_value,
            dual_value: s.dual_value,
            gap: s.gap,
            relative_gap: s.relative_gap,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            certificate_passed: cert.passed,
            certificate_failures: cert.failures.clone(),
            detail: s.detail.clone(),
        }
    }

    pub fn status_name(&self) -> &'static str {
        status_name(self.status)
    }
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "OPTIMAL",
        SolveStatus::Infeasible => "INFEASIBLE",
        SolveStatus::MaxIter => "MAX_ITER",
        SolveStatus::Numerical => "NUMERICAL",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub query: ThresholdQuery,
    /// `raw_objective / normalization`.
    pub epsilon_threshold: f64,
    /// Optimal `Tr(E0 J)`, clipped at zero.
    pub raw_objective: f64,
    /// `1 - exp(-eta mu)`.
    pub normalization: f64,
    pub solution: SolutionSummary,
}

impl ThresholdResult {
    pub fn mu(&self) -> f64 {
        self.query.mu.value()
    }

    pub fn eta(&self) -> f64 {
        self.query.eta.value()
    }
}

pub fn compute_threshold(mu: f64, eta: f64) -> Result<ThresholdResult, ThresholdError> {
    compute_threshold_with(ThresholdQuery::new(mu, eta)?, &threshold_solve_options())
}

/// Solves one instance. Anything other than a certified optimum is an error.
pub fn compute_threshold_with(query: ThresholdQuery, opts: &SolveOptions) -> Result<ThresholdResult, ThresholdError> {
    let cp = build_cloning_problem(query);
    let sol = solve(&cp.problem, opts);
    let cert = check_certificate_with(&cp.problem, &sol, CERTIFICATE_TOL, opts.psd_tol, CERTIFICATE_GAP_TOL);
    let summary = SolutionSummary::new(&sol, &cert);
    if sol.status != SolveStatus::Optimal || !cert.passed {
        let mut summary = summary;
        if sol.status == SolveStatus::Optimal {
            summary.detail = format!("certificate failed: {}", cert.failures.join("; "));
        }
        return Err(ThresholdError::Solver {
            mu: query.mu.value(),
            eta: query.eta.value(),
            summary: Box::new(summary),
        });
    }
    let raw_objective = sol.primal_value.max(0.0);
    let normalization = query.normalization();
    Ok(ThresholdResult {
        query,
        epsilon_threshold: raw_objective / normalization,
        raw_objective,
        normalization,
        solution: summary,
    })
}

/// Error rate the intercept-resend cloner induces, normalised like a
/// threshold: `P(1) / (8 (1 - exp(-eta mu)))`. No threshold can exceed it.
pub fn intercept_resend_error(query: ThresholdQuery) -> f64 {
    poisson_split(query.mu).p1 / (8.0 * query.normalization())
}

/// [`intercept_resend_error`] evaluated from the attack's Choi matrix.
pub fn intercept_resend_error_from_choi(query: ThresholdQuery) -> f64 {
    let ops = OperatorSet::new(query.mu);
    ops.e0.inner(&intercept_resend_choi()) / query.normalization()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mu: f64,
    pub eta: f64,
    pub result: Result<ThresholdResult, SweepFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub status: Option<SolveStatus>,
    pub message: String,
}

/// Every cell of a sweep, ordered by `(eta, mu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mu_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

/// Complete sweep; `results[i][j]` belongs to `eta_values[i]`, `mu_values[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub mu_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub results: Vec<Vec<ThresholdResult>>,
}

impl SweepGrid {
    pub fn get(&self, mu_index: usize, eta_index: usize) -> &ThresholdResult {
        &self.results[eta_index][mu_index]
    }

    /// Cells in `(eta, mu)` order.
    pub fn iter(&self) -> impl Iterator<Item = &ThresholdResult> {
        self.results.iter().flatten()
    }
}

impl SweepReport {
    pub fn failures(&self) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| c.result.is_err()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.result.is_ok())
    }

    /// The grid, or the failed cells when any is missing.
    pub fn into_grid(self) -> Result<SweepGrid, Vec<SweepCell>> {
        if !self.is_complete() {
            return Err(self.cells.into_iter().filter(|c| c.result.is_err()).collect());
        }
        let width = self.mu_values.len();
        let mut results = Vec::with_capacity(self.eta_values.len());
        let mut row = Vec::with_capacity(width);
        for cell in self.cells {
            row.push(cell.result.expect("checked complete"));
            if row.len() == width {
                results.push(std::mem::replace(&mut row, Vec::with_capacity(width)));
            }
        }
        Ok(SweepGrid {
            mu_values: self.mu_values,
            eta_values: self.eta_values,
            results,
        })
    }
}

fn sorted_unique(values: &[f64], name: &str) -> Result<Vec<f64>, ThresholdError> {
    if values.is_empty() {
        return Err(ThresholdError::InvalidGrid(format!("{name} list is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ThresholdError::InvalidGrid(format!(
            "{name} list has a non-finite value"
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Computes every `(mu, eta)` cell in parallel. Inputs are sorted and
/// deduplicated; each value is validated before any solve.
pub fn sweep(mu_values: &[f64], eta_values: &[f64]) -> Result<SweepReport, ThresholdError> {
    sweep_with(mu_values, eta_values, &threshold_solve_options())
}

pub fn sweep_with(mu_values: &[f64], eta_values: &[f64], opts: &SolveOptions) -> Result<SweepReport, ThresholdError> {
    let mus = sorted_unique(mu_values, "mu")?;
    let etas = sorted_unique(eta_values, "eta")?;
    let mut queries = Vec::with_capacity(mus.len() * etas.len());
    for &eta in &etas {
        for &mu in &mus {
            queries.push(ThresholdQuery::new(mu, eta)?);
        }
    }
    let cells = queries
        .par_iter()
        .map(|&q| SweepCell {
            mu: q.mu.value(),
            eta: q.eta.value(),
            result: compute_threshold_with(q, opts).map_err(|e| SweepFailure {
                status: match &e {
                    ThresholdError::Solver { summary, .. } => Some(summary.status),
                    _ => None,
                },
                message: e.to_string(),
            }),
        })
        .collect();
    Ok(SweepReport {
        mu_values: mus,
        eta_values: etas,
        cells,
    })
}

/// Memoised thresholds keyed by the exact bits of `(mu, eta)`.
#[derive(Debug, Default)]
pub struct ThresholdCache {
    entries: Mutex<HashMap<(u64, u64), ThresholdResult>>,
}

impl ThresholdCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, mu: f64, eta: f64) -> Result<ThresholdResult, ThresholdError> {
        let key = (mu.to_bits(), eta.to_bits());
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let result = compute_threshold(mu, eta)?;
        self.entries.lock().expect("cache lock").insert(key, result.clone());
        Ok(result)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::CHOI_DIM;
    use approx::assert_abs_diff_eq;

    #[test]
    fn anchor_instance_matches_reference() {
        let r = compute_threshold(1.0, 0.77).unwrap();
        assert_abs_diff_eq!(r.raw_objective, 0.013005351281, epsilon = 1e-7);
        assert_abs_diff_eq!(r.epsilon_threshold, 0.024219120641, epsilon = 1e-7);
        assert_abs_diff_eq!(r.epsilon_threshold, r.raw_objective / r.normalization, epsilon = 1e-15);
        assert!(r.solution.relative_gap <= CERTIFICATE_GAP_TOL);
    }

    #[test]
    fn half_efficiency_gives_zero() {
        let r = compute_threshold(1.0, 0.5).unwrap();
        assert!(r.epsilon_threshold < 1e-6, "{r:?}");
    }

    #[test]
    fn invalid_queries_are_rejected() {
        assert!(matches!(
            compute_threshold(1.0, 1.3),
            Err(ThresholdError::InvalidEfficiency(_))
        ));
        assert!(matches!(
            compute_threshold(1.0, 0.0),
            Err(ThresholdError::InvalidEfficiency(_))
        ));
        assert!(matches!(compute_threshold(-1.0, 0.7), Err(ThresholdError::State(_))));
    }

    #[test]
    fn intercept_resend_bound_agrees_with_its_choi_matrix() {
        for &(mu, eta) in &[(0.5, 0.6), (1.0, 0.77), (2.0, 0.9)] {
            let q = ThresholdQuery::new(mu, eta).unwrap();
            assert_abs_diff_eq!(
                intercept_resend_error(q),
                intercept_resend_error_from_choi(q),
                epsilon = 1e-12
            );
        }
        let r = compute_threshold(1.0, 0.77).unwrap();
        assert!(r.epsilon_threshold <= intercept_resend_error(r.query));
    }

    #[test]
    fn normalised_choi_convention_gives_same_threshold() {
        // With J' = J / 7 every trace-preservation target becomes 1/7 and the
        // loss bounds scale likewise; the objective scales by 1/7.
        let q = ThresholdQuery::new(1.0, 0.77).unwrap();
        let cp = build_cloning_problem(q);
        let d = 7.0;
        let scale = |cs: &[LinearConstraint]| {
            cs.iter()
                .map(|c| LinearConstraint::new(c.matrix.clone(), c.rhs / d))
                .collect::<Vec<_>>()
        };
        let p = SdpProblem::new(
            cp.problem.objective.clone(),
            Sense::Min,
            scale(&cp.problem.equalities),
            scale(&cp.problem.inequalities),
        )
        .unwrap();
        let mut opts = threshold_solve_options();
        opts.initial_point = InitialPoint::Scaled {
            primal: 1.0 / (9.0 * d),
            dual: 1.0,
        };
        let s = solve(&p, &opts);
        assert_eq!(s.status, SolveStatus::Optimal);
        let r = compute_threshold_with(q, &threshold_solve_options()).unwrap();
        assert_abs_diff_eq!(
            s.primal_value * d / q.normalization(),
            r.epsilon_threshold,
            epsilon = 1e-8
        );
        assert_eq!(s.x.dim(), CHOI_DIM);
    }

    #[test]
    fn reruns_are_deterministic() {
        let a = compute_threshold(1.5, 0.7).unwrap();
        let b = compute_threshold(1.5, 0.7).unwrap();
        assert_eq!(a.epsilon_threshold.to_bits(), b.epsilon_threshold.to_bits());
    }

    #[test]
    fn single_cell_sweep_equals_direct_solve() {
        let grid = sweep(&[1.0], &[0.77]).unwrap().into_grid().unwrap();
        let direct = compute_threshold(1.0, 0.77).unwrap();
        assert_eq!(grid.get(0, 0), &direct);
    }

    #[test]
    fn sweep_rejects_empty_and_invalid_lists() {
        assert!(matches!(sweep(&[], &[0.7]), Err(ThresholdError::InvalidGrid(_))));
        assert!(matches!(
            sweep(&[1.0], &[1.5]),
            Err(ThresholdError::InvalidEfficiency(_))
        ));
    }

    #[test]
    fn sweep_reports_failed_cells() {
        let opts = SolveOptions {
            max_iter: 3,
            ..threshold_solve_options()
        };
        let report = sweep_with(&[1.0, 2.0], &[0.8], &opts).unwrap();
        assert_eq!(report.failures().len(), 2);
        assert_eq!(
            report.cells[0].result.as_ref().unwrap_err().status,
            Some(SolveStatus::MaxIter)
        );
        assert!(report.into_grid().is_err());
    }

    #[test]
    fn cache_reuses_results() {
        let cache = ThresholdCache::new();
        let a = cache.get(1.0, 0.8).unwrap();
        let b = cache.get(1.0, 0.8).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }
}
