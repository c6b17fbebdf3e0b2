//! Independent check of a returned primal-dual pair.

use serde::{Deserialize, Serialize};

use super::{SdpProblem, SdpSolution, Sense};
use crate::linalg::{eig_hermitian_matrix, ComplexMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub passed: bool,
    /// Largest `|Tr(A_i X) - b_i|`.
    pub max_equality_residual: f64,
    /// Largest `max(0, Tr(G_j X) - h_j)`.
    pub max_inequality_violation: f64,
    pub min_eig_x: f64,
    /// Smallest eigenvalue of the dual slack rebuilt from the multipliers.
    pub min_eig_z: f64,
    pub min_multiplier: f64,
    /// `Tr(C X)` recomputed, in the problem's sense.
    pub primal_value: f64,
    /// `b.y - h.lambda` recomputed, in the problem's sense.
    pub dual_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub failures: Vec<String>,
}

/// Rebuilds residuals, the dual slack and both objectives from `s`, and
/// checks them against the tolerances the solver was run with.
///
/// `tol` bounds the feasibility residuals, `psd_tol` the negative
/// eigenvalues and multipliers, and `gap_tol` the relative duality gap.
/// A NaN in any quantity fails the corresponding check.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_certificate_with(
    p: &SdpProblem,
    s: &SdpSolution,
    tol: f64,
    psd_tol: f64,
    gap_tol: f64,
) -> CertificateReport {
    let mut failures = Vec::new();
    let x = s.x.matrix();
    let n = p.variable_dim();

    if s.x.dim() != n
        || s.equality_multipliers.len() != p.equalities.len()
        || s.inequality_multipliers.len() != p.inequalities.len()
    {
        return CertificateReport {
            passed: false,
            max_equality_residual: f64::INFINITY,
            max_inequality_violation: f64::INFINITY,
            min_eig_x: f64::NAN,
            min_eig_z: f64::NAN,
            min_multiplier: f64::NAN,
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            gap: f64::INFINITY,
            relative_gap: f64::INFINITY,
            failures: vec!["solution shape does not match the problem".into()],
        };
    }

    let max_equality_residual = p
        .equalities
        .iter()
        .map(|c| (c.matrix.matrix().re_trace_product(x) - c.rhs).abs())
        .fold(0.0, f64::max);
    let max_inequality_violation = p
        .inequalities
        .iter()
        .map(|c| (c.matrix.matrix().re_trace_product(x) - c.rhs).max(0.0))
        .fold(0.0, f64::max);

    let c_min = p.min_form_objective().into_matrix();
    let mut z: ComplexMatrix = c_min.clone();
    for (c, &y) in p.equalities.iter().zip(&s.equality_multipliers) {
        z.add_scaled(c.matrix.matrix(), -y);
    }
    for (c, &l) in p.inequalities.iter().zip(&s.inequality_multipliers) {
        z.add_scaled(c.matrix.matrix(), l);
    }
    let min_eig = |m: &ComplexMatrix| eig_hermitian_matrix(m).map(|e| e.eigenvalues[0]).unwrap_or(f64::NAN);
    let min_eig_x = min_eig(x);
    let min_eig_z = min_eig(&z.hermitian_part());
    let min_multiplier = s.inequality_multipliers.iter().cloned().fold(f64::INFINITY, f64::min);

    let pobj = c_min.re_trace_product(x);
    let dobj: f64 = p
        .equalities
        .iter()
        .zip(&s.equality_multipliers)
        .map(|(c, y)| c.rhs * y)
        .sum::<f64>()
        - p.inequalities
            .iter()
            .zip(&s.inequality_multipliers)
            .map(|(c, l)| c.rhs * l)
            .sum::<f64>();
    let (primal_value, dual_value) = match p.sense {
        Sense::Min => (pobj, dobj),
        Sense::Max => (-pobj, -dobj),
    };
    let gap = (primal_value - dual_value).abs();
    let relative_gap = gap / (1.0 + primal_value.abs());

    let scale = 1.0
        + p.equalities
            .iter()
            .chain(&p.inequalities)
            .map(|c| c.rhs.abs())
            .fold(0.0, f64::max);
    if !(max_equality_residual <= tol * scale) {
        failures.push(format!("equality residual {max_equality_residual:e}"));
    }
    if !(max_inequality_violation <= tol * scale) {
        failures.push(format!("inequality violation {max_inequality_violation:e}"));
    }
    if !(min_eig_x >= -psd_tol) {
        failures.push(format!("X has eigenvalue {min_eig_x:e}"));
    }
    let z_scale = 1.0 + c_min.frobenius_norm();
    if !(min_eig_z >= -psd_tol * z_scale) {
        failures.push(format!("dual slack has eigenvalue {min_eig_z:e}"));
    }
    if !s.inequality_multipliers.is_empty() && !(min_multiplier >= -psd_tol) {
        failures.push(format!("negative inequality multiplier {min_multiplier:e}"));
    }
    if !(relative_gap <= gap_tol) {
        failures.push(format!("relative duality gap {relative_gap:e}"));
    }

    CertificateReport {
        passed: failures.is_empty(),
        max_equality_residual,
        max_inequality_violation,
        min_eig_x,
        min_eig_z,
        min_multiplier,
        primal_value,
        dual_value,
        gap,
        relative_gap,
        failures,
    }
}

/// [`check_certificate_with`] at the default solver tolerances, with a
/// factor of ten of slack on the gap and the feasibility residuals.
pub fn check_certificate(p: &SdpProblem, s: &SdpSolution) -> CertificateReport {
    let o = super::SolveOptions::default();
    check_certificate_with(p, s, 10.0 * o.feas_tol, o.psd_tol, 10.0 * o.gap_tol)
}
