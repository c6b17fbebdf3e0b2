//! Small dense semidefinite programs over Hermitian matrices.
//!
//! A problem optimises `Tr(C X)` over Hermitian `X >= 0` subject to
//! `Tr(A_i X) = b_i` and `Tr(G_j X) <= h_j`. [`solve`] runs a primal-dual
//! interior-point method and returns both objective values, so every
//! reported optimum carries its own duality certificate; [`check_certificate`]
//! re-derives that certificate from scratch.
//!
//! Problems and solutions serialise to JSON with every matrix written as
//! nested rows of `[re, im]` pairs.

mod certificate;
mod solver;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::HermitianOperator;

pub use certificate::{check_certificate, check_certificate_with, CertificateReport};
pub use solver::solve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("constraint {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("equality constraints are linearly dependent (Gram eigenvalue ratio {ratio:e})")]
    DependentEqualities { ratio: f64 },
    #[error("non-finite right-hand side in constraint {0}")]
    NonFiniteRhs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// `Tr(matrix X)` compared against `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub matrix: HermitianOperator,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(matrix: HermitianOperator, rhs: f64) -> Self {
        Self { matrix, rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub objective: HermitianOperator,
    pub sense: Sense,
    /// `Tr(A_i X) = b_i`
    pub equalities: Vec<LinearConstraint>,
    /// `Tr(G_j X) <= h_j`
    pub inequalities: Vec<LinearConstraint>,
}

/// Tolerance on the Gram-matrix eigenvalue ratio below which equality rows
/// count as dependent.
pub const GRAM_RANK_TOL: f64 = 1e-8;

impl SdpProblem {
    pub fn new(
        objective: HermitianOperator,
        sense: Sense,
        equalities: Vec<LinearConstraint>,
        inequalities: Vec<LinearConstraint>,
    ) -> Result<Self, SdpError> {
        let p = Self {
            objective,
            sense,
            equalities,
            inequalities,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn variable_dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let n = self.variable_dim();
        for (index, c) in self.equalities.iter().chain(&self.inequalities).enumerate() {
            if c.matrix.dim() != n {
                return Err(SdpError::DimensionMismatch {
                    index,
                    expected: n,
                    found: c.matrix.dim(),
                });
            }
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFiniteRhs(index));
            }
        }
        let m = self.equalities.len();
        if m == 0 {
            return Ok(());
        }
        let gram = DMatrix::from_fn(m, m, |i, j| self.equalities[i].matrix.inner(&self.equalities[j].matrix));
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let max = eig.iter().cloned().fold(0.0f64, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio < GRAM_RANK_TOL {
            return Err(SdpError::DependentEqualities { ratio });
        }
        Ok(())
    }

    /// Objective of the equivalent minimisation.
    pub(crate) fn min_form_objective(&self) -> HermitianOperator {
        match self.sense {
            Sense::Min => self.objective.clone(),
            Sense::Max => self.objective.scale(-1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    Numerical,
}

/// Starting point of the interior-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialPoint {
    /// Scales chosen from the problem data.
    Auto,
    /// `X = primal * I`, `Z = dual * I`, inequality slacks and their
    /// multipliers set to the same scalars.
    Scaled { primal: f64, dual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Bound on `|primal - dual| / (1 + |primal|)`.
    pub gap_tol: f64,
    /// Bound on relative primal and dual residuals.
    pub feas_tol: f64,
    pub psd_tol: f64,
    /// Fraction-to-boundary factor applied to the maximal step.
    pub step_fraction: f64,
    /// Newton systems with a larger condition number abort as `NUMERICAL`.
    pub max_condition: f64,
    /// Objective magnitude past which the iteration is declared divergent,
    /// i.e. a primal (or dual) infeasibility certificate.
    pub divergence_bound: f64,
    pub initial_point: InitialPoint,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gap_tol: 1e-7,
            feas_tol: 1e-9,
            psd_tol: 1e-8,
            step_fraction: 0.98,
            max_condition: 1e14,
            divergence_bound: 1e8,
            initial_point: InitialPoint::Auto,
        }
    }
}

/// One interior-point iterate, recorded before its step is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// `Tr(C X)` in the problem's own sense.
    pub primal_value: f64,
    /// Dual objective in the problem's own sense.
    pub dual_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub x: HermitianOperator,
    /// Multipliers `y_i` of the equalities in the minimisation form, where
    /// the dual slack is `Z = C_min - sum_i y_i A_i + sum_j lambda_j G_j`.
    pub equality_multipliers: Vec<f64>,
    /// Multipliers `lambda_j >= 0` of the inequalities.
    pub inequality_multipliers: Vec<f64>,
    /// Relative primal and dual residuals at the returned iterate.
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// How a non-optimal status was reached.
    pub detail: String,
    pub history: Vec<IterationLog>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, HermitianOperator};
    use num_complex::Complex64;

    #[test]
    fn dependent_equalities_are_rejected() {
        let id = HermitianOperator::identity(2);
        let err = SdpProblem::new(
            id.clone(),
            Sense::Min,
            vec![
                LinearConstraint::new(id.clone(), 1.0),
                LinearConstraint::new(id.scale(2.0), 2.0),
            ],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, SdpError::DependentEqualities { .. }));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = SdpProblem::new(
            HermitianOperator::identity(2),
            Sense::Min,
            vec![LinearConstraint::new(HermitianOperator::identity(3), 1.0)],
            vec![],
        )
        .unwrap_err();
        assert_eq!(
            err,
            SdpError::DimensionMismatch {
                index: 0,
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn problem_json_uses_re_im_pairs() {
        let mut c = ComplexMatrix::identity(2);
        c[(0, 1)] = Complex64::new(0.5, -0.25);
        c[(1, 0)] = Complex64::new(0.5, 0.25);
        let p = SdpProblem::new(
            HermitianOperator::new(c).unwrap(),
            Sense::Max,
            vec![LinearConstraint::new(HermitianOperator::identity(2), 1.0)],
            vec![],
        )
        .unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["objective"][0][1], serde_json::json!([0.5, -0.25]));
        assert_eq!(v["sense"], "max");
        let back: SdpProblem = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);

        let bad = serde_json::json!({
            "objective": [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [1.0, 0.0]]],
            "sense": "min", "equalities": [], "inequalities": []
        });
        assert!(serde_json::from_value::<SdpProblem>(bad).is_err());
    }
}
