//! Operators describing a cloning adversary.
//!
//! The adversary's most general strategy is a CPTP map from the bank's 7-dim
//! state space to two squashed copies, each living in `{|0>, |1>, |empty>}`.
//! It is represented by its un-normalised Choi matrix `J` on
//! `COPY1 (x) COPY2 (x) INITIAL` (dimension 63), for which
//! `Tr(A (x) conj(rho)) J) = Tr(A Lambda(rho))` and trace preservation reads
//! `Tr_{COPY1, COPY2} J = 1_7`.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    kron_all, kron_matrix, partial_trace_dims, permute_subsystems, ComplexMatrix, HermitianOperator, LinalgError,
    SpaceLabel,
};
use crate::states::{
    conjugate_state, money_states, squashed_qubit, MeanPhotonNumber, StateIndex, MULTIPHOTON_BASE, QUBIT_H, STATE_DIM,
    VACUUM,
};

pub const COPY_DIM: usize = 3;
/// Verifier outcome `|0>` (H-like).
pub const OUTCOME_ZERO: usize = 0;
/// Verifier outcome `|1>` (V-like).
pub const OUTCOME_ONE: usize = 1;
/// No-detection flag.
pub const OUTCOME_EMPTY: usize = 2;

pub const CHOI_SPACES: [SpaceLabel; 3] = [SpaceLabel::Copy1, SpaceLabel::Copy2, SpaceLabel::Initial];
pub const CHOI_DIMS: [usize; 3] = [COPY_DIM, COPY_DIM, STATE_DIM];
pub const CHOI_DIM: usize = COPY_DIM * COPY_DIM * STATE_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("memory efficiency must be in (0, 1], got {0}")]
    InvalidEfficiency(f64),
    #[error("mean photon number must be finite and non-negative, got {0}")]
    InvalidMeanPhotonNumber(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which copy a verifier operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Copy {
    First,
    Second,
}

/// Shape of the Choi variable of the cloning map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChoiVariableSpec {
    pub output_spaces: [SpaceLabel; 2],
    pub input_space: SpaceLabel,
}

impl Default for ChoiVariableSpec {
    fn default() -> Self {
        Self {
            output_spaces: [SpaceLabel::Copy1, SpaceLabel::Copy2],
            input_space: SpaceLabel::Initial,
        }
    }
}

impl ChoiVariableSpec {
    pub fn output_dim(&self) -> usize {
        self.output_spaces.iter().map(|s| s.dim()).product()
    }

    pub fn input_dim(&self) -> usize {
        self.input_space.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.output_dim() * self.input_dim()
    }

    /// Trace preservation requires the output partial trace to equal this.
    pub fn tp_target(&self) -> HermitianOperator {
        HermitianOperator::identity(self.input_dim())
    }
}

/// Embeds a qubit vector into the copy space (zero amplitude on `|empty>`).
pub fn embed_qubit(v: &[Complex64; 2]) -> [Complex64; COPY_DIM] {
    [v[0], v[1], Complex64::new(0.0, 0.0)]
}

fn on_copy(copy: Copy, local: &HermitianOperator, tail: &HermitianOperator) -> HermitianOperator {
    let id = HermitianOperator::identity(COPY_DIM);
    let factors = match copy {
        Copy::First => [local, &id, tail],
        Copy::Second => [&id, local, tail],
    };
    kron_all(&factors).expect("63-dim product is within limits")
}

fn verifier_operator(
    copy: Copy,
    mu: MeanPhotonNumber,
    local: impl Fn(StateIndex) -> HermitianOperator,
) -> HermitianOperator {
    money_states(mu)
        .iter()
        .map(|s| on_copy(copy, &local(s.k), &conjugate_state(s)).scale(0.25))
        .fold(HermitianOperator::zeros(CHOI_DIM), |acc, t| acc.add(&t))
}

/// `E = (1/4) sum_k (1/2) |beta_k^perp><beta_k^perp| (x) 1 (x) conj(rho_k)`,
/// with the projector on the chosen copy. `Tr(E J)` is the probability that
/// the verifier of that copy picks the encoding basis and sees a wrong bit.
pub fn build_error_operator(copy: Copy, mu: MeanPhotonNumber) -> HermitianOperator {
    verifier_operator(copy, mu, |k| {
        HermitianOperator::projector(&embed_qubit(&squashed_qubit(k).beta_perp)).scale(0.5)
    })
}

/// Counterpart of [`build_error_operator`] with `beta_k` in place of `beta_k^perp`.
pub fn build_correct_operator(copy: Copy, mu: MeanPhotonNumber) -> HermitianOperator {
    verifier_operator(copy, mu, |k| {
        HermitianOperator::projector(&embed_qubit(&squashed_qubit(k).beta)).scale(0.5)
    })
}

/// `L = (1/4) sum_k |empty><empty| (x) 1 (x) conj(rho_k)`: the probability that
/// the verifier of that copy registers no detection.
pub fn build_loss_operator(copy: Copy, mu: MeanPhotonNumber) -> HermitianOperator {
    let mut empty = ComplexMatrix::zeros(COPY_DIM, COPY_DIM);
    empty[(OUTCOME_EMPTY, OUTCOME_EMPTY)] = Complex64::new(1.0, 0.0);
    let empty = HermitianOperator::from_hermitian_part(&empty);
    verifier_operator(copy, mu, |_| empty.clone())
}

/// Error and loss operators for both copies at one mean photon number.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub mu: MeanPhotonNumber,
    pub e0: HermitianOperator,
    pub e1: HermitianOperator,
    pub l0: HermitianOperator,
    pub l1: HermitianOperator,
}

impl OperatorSet {
    pub fn new(mu: MeanPhotonNumber) -> Self {
        Self {
            mu,
            e0: build_error_operator(Copy::First, mu),
            e1: build_error_operator(Copy::Second, mu),
            l0: build_loss_operator(Copy::First, mu),
            l1: build_loss_operator(Copy::Second, mu),
        }
    }
}

/// Exchanges the two copy factors of an operator on the Choi space.
pub fn swap_copies(op: &HermitianOperator) -> HermitianOperator {
    let swapped = permute_subsystems(op.matrix(), &CHOI_DIMS, &[1, 0, 2]).expect("Choi dims are fixed");
    HermitianOperator::from_hermitian_part(&swapped)
}

/// Linear rows `Tr(A_i J) = b_i` equivalent to `Tr_{outputs} J = 1_in`.
///
/// One row per diagonal entry (target 1), then for each pair `a < b` one row
/// for `2 Re` and one for `2 Im` of entry `(a, b)` (target 0).
pub fn tp_constraint_rows(spec: &ChoiVariableSpec) -> Vec<(HermitianOperator, f64)> {
    let d = spec.input_dim();
    let id_out = ComplexMatrix::identity(spec.output_dim());
    let lift = |local: ComplexMatrix| HermitianOperator::from_hermitian_part(&kron_matrix(&id_out, &local));
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut rows = Vec::with_capacity(d * d);
    for a in 0..d {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(a, a)] = one;
        rows.push((lift(m), 1.0));
    }
    for a in 0..d {
        for b in a + 1..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re[(a, b)] = one;
            re[(b, a)] = one;
            rows.push((lift(re), 0.0));
            let mut im = ComplexMatrix::zeros(d, d);
            im[(a, b)] = i;
            im[(b, a)] = -i;
            rows.push((lift(im), 0.0));
        }
    }
    rows
}

/// Expected honest no-detection probability `exp(-eta mu)`.
pub fn honest_loss_bound(mu: f64, eta: f64) -> Result<f64, AdversaryError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(AdversaryError::InvalidEfficiency(eta));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(AdversaryError::InvalidMeanPhotonNumber(mu));
    }
    Ok((-eta * mu).exp())
}

/// Choi matrix `sum_K |K>><<K|` of a channel given by Kraus operators
/// (each `output_dim x input_dim`), with the input factor last.
pub fn choi_from_kraus(kraus: &[ComplexMatrix]) -> HermitianOperator {
    let (out_dim, in_dim) = (kraus[0].rows(), kraus[0].cols());
    let n = out_dim * in_dim;
    let mut j = ComplexMatrix::zeros(n, n);
    for k in kraus {
        assert_eq!((k.rows(), k.cols()), (out_dim, in_dim));
        // |K>> has component K[o, i] at index o * in_dim + i
        j.add_scaled(&ComplexMatrix::outer(k.as_slice()), 1.0);
    }
    HermitianOperator::from_hermitian_part(&j)
}

/// Choi matrix of the measure-and-prepare channel `rho -> sum_m Tr(M_m rho) sigma_m`,
/// given as `(effect M_m, prepared state sigma_m)` pairs.
pub fn choi_measure_prepare(branches: &[(HermitianOperator, HermitianOperator)]) -> HermitianOperator {
    branches
        .iter()
        .map(|(effect, prepared)| {
            HermitianOperator::from_hermitian_part(&kron_matrix(prepared.matrix(), &effect.matrix().conj()))
        })
        .reduce(|a, b| a.add(&b))
        .expect("at least one branch")
}

/// Applies the channel with Choi matrix `j` (input factor last) to `rho`:
/// `Tr_in[J (1 (x) rho^T)]`.
pub fn apply_channel(
    j: &HermitianOperator,
    rho: &HermitianOperator,
    output_dim: usize,
) -> Result<HermitianOperator, LinalgError> {
    let in_dim = rho.dim();
    let lifted = kron_matrix(&ComplexMatrix::identity(output_dim), &rho.matrix().transpose());
    let prod = j.matrix().matmul(&lifted);
    let out = partial_trace_dims(&prod, &[output_dim, in_dim], &[true, false])?;
    Ok(HermitianOperator::from_hermitian_part(&out))
}

fn basis_vec(dim: usize, idx: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    v[idx] = Complex64::new(1.0, 0.0);
    v
}

fn copy_pair(a: &[Complex64], b: &[Complex64]) -> HermitianOperator {
    HermitianOperator::projector(
        kron_matrix(
            &ComplexMatrix::from_row_major(a.len(), 1, a.to_vec()).expect("finite"),
            &ComplexMatrix::from_row_major(b.len(), 1, b.to_vec()).expect("finite"),
        )
        .as_slice(),
    )
}

fn qubit_in_input(q: &[Complex64; 2]) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); STATE_DIM];
    v[QUBIT_H] = q[0];
    v[QUBIT_H + 1] = q[1];
    v
}

/// Intercept-resend cloner: the single-photon sector is measured in a random
/// conjugate basis and the outcome is re-prepared on both copies; multiphoton
/// flags are read perfectly and cloned; vacuum yields no detection on either
/// copy. It satisfies every constraint of the threshold problem, so its error
/// upper-bounds the optimum.
pub fn intercept_resend_choi() -> HermitianOperator {
    let empty = basis_vec(COPY_DIM, OUTCOME_EMPTY);
    let mut branches = vec![(
        HermitianOperator::projector(&basis_vec(STATE_DIM, VACUUM)),
        copy_pair(&empty, &empty),
    )];
    for k in StateIndex::ALL {
        let beta = squashed_qubit(k).beta;
        let out = embed_qubit(&beta);
        branches.push((
            HermitianOperator::projector(&qubit_in_input(&beta)).scale(0.5),
            copy_pair(&out, &out),
        ));
        branches.push((
            HermitianOperator::projector(&basis_vec(STATE_DIM, MULTIPHOTON_BASE + k.get())),
            copy_pair(&out, &out),
        ));
    }
    choi_measure_prepare(&branches)
}

/// Honest forwarding to the first verifier, second copy empty: vacuum maps to
/// `|empty>`, the qubit passes through unchanged and multiphoton flag `m_k`
/// is replaced by `|beta_k>`.
pub fn honest_forwarding_choi() -> HermitianOperator {
    let out_dim = COPY_DIM * COPY_DIM;
    let out_index = |copy1: usize| copy1 * COPY_DIM + OUTCOME_EMPTY;
    let mut isometry = ComplexMatrix::zeros(out_dim, STATE_DIM);
    let one = Complex64::new(1.0, 0.0);
    isometry[(out_index(OUTCOME_EMPTY), VACUUM)] = one;
    isometry[(out_index(OUTCOME_ZERO), QUBIT_H)] = one;
    isometry[(out_index(OUTCOME_ONE), QUBIT_H + 1)] = one;
    let mut j = choi_from_kraus(&[isometry]);
    let empty = basis_vec(COPY_DIM, OUTCOME_EMPTY);
    let flags: Vec<_> = StateIndex::ALL
        .iter()
        .map(|&k| {
            (
                HermitianOperator::projector(&basis_vec(STATE_DIM, MULTIPHOTON_BASE + k.get())),
                copy_pair(&embed_qubit(&squashed_qubit(k).beta), &empty),
            )
        })
        .collect();
    j = j.add(&choi_measure_prepare(&flags));
    j
}
