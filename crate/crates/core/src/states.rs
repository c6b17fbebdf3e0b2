//! Phase-randomised weak coherent money states.
//!
//! After phase randomisation a pulse is a Poisson mixture of photon-number
//! states, so each of the four money states is a 7x7 density matrix on the
//! basis `{v, H, V, m0, m1, m2, m3}`: vacuum, a polarisation qubit, and four
//! perfectly distinguishable multiphoton flags.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, HermitianOperator};

/// Upper bound on accepted mean photon numbers.
pub const MAX_MEAN_PHOTON_NUMBER: f64 = 20.0;

pub const STATE_DIM: usize = 7;
pub const VACUUM: usize = 0;
pub const QUBIT_H: usize = 1;
pub const QUBIT_V: usize = 2;
pub const MULTIPHOTON_BASE: usize = 3;
pub const BASIS_LABELS: [&str; STATE_DIM] = ["v", "H", "V", "m0", "m1", "m2", "m3"];

/// Relative phase of the circular states: `|sigma+> = (|H> + i|V>)/sqrt(2)`.
/// Every trace entering the threshold problem is invariant under flipping it.
pub const SIGMA_PLUS_PHASE: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("mean photon number must be in (0, {MAX_MEAN_PHOTON_NUMBER}], got {0}")]
    InvalidMeanPhotonNumber(f64),
    #[error("state index must be 0..=3, got {0}")]
    InvalidStateIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MeanPhotonNumber(f64);

impl MeanPhotonNumber {
    pub fn new(mu: f64) -> Result<Self, StateError> {
        if mu.is_finite() && mu > 0.0 && mu <= MAX_MEAN_PHOTON_NUMBER {
            Ok(Self(mu))
        } else {
            Err(StateError::InvalidMeanPhotonNumber(mu))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MeanPhotonNumber {
    type Error = StateError;

    fn try_from(mu: f64) -> Result<Self, StateError> {
        Self::new(mu)
    }
}

impl From<MeanPhotonNumber> for f64 {
    fn from(mu: MeanPhotonNumber) -> f64 {
        mu.0
    }
}

/// Index `k` of one of the four money states: H, sigma+, V, sigma-.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct StateIndex(usize);

impl StateIndex {
    pub const ALL: [StateIndex; 4] = [StateIndex(0), StateIndex(1), StateIndex(2), StateIndex(3)];

    pub fn new(k: usize) -> Result<Self, StateError> {
        if k < 4 {
            Ok(Self(k))
        } else {
            Err(StateError::InvalidStateIndex(k))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for StateIndex {
    type Error = StateError;

    fn try_from(k: usize) -> Result<Self, StateError> {
        Self::new(k)
    }
}

impl From<StateIndex> for usize {
    fn from(k: StateIndex) -> usize {
        k.0
    }
}

/// Photon-number probabilities of a Poisson source: 0, 1 and at least 2 photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonSplit {
    pub p0: f64,
    pub p1: f64,
    pub p2plus: f64,
}

pub fn poisson_split(mu: MeanPhotonNumber) -> PoissonSplit {
    let mu = mu.value();
    let e = (-mu).exp();
    // -expm1(-mu) - mu e^{-mu} keeps precision for small mu.
    let p2plus = (-(-mu).exp_m1() - mu * e).max(0.0);
    PoissonSplit {
        p0: e,
        p1: mu * e,
        p2plus,
    }
}

/// The squashed qubit `|beta_k>` together with its orthogonal complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashedQubit {
    pub k: StateIndex,
    pub beta: [Complex64; 2],
    pub beta_perp: [Complex64; 2],
}

fn sigma(sign: f64) -> [Complex64; 2] {
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        SIGMA_PLUS_PHASE * (sign * FRAC_1_SQRT_2),
    ]
}

pub fn squashed_qubit(k: StateIndex) -> SquashedQubit {
    let h = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let v = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let (beta, beta_perp) = match k.get() {
        0 => (h, v),
        1 => (sigma(1.0), sigma(-1.0)),
        2 => (v, h),
        _ => (sigma(-1.0), sigma(1.0)),
    };
    SquashedQubit { k, beta, beta_perp }
}

/// A phase-randomised money state `rho_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoneyState {
    pub k: StateIndex,
    pub mu: MeanPhotonNumber,
    pub rho: HermitianOperator,
}

impl MoneyState {
    pub fn basis_labels(&self) -> [&'static str; STATE_DIM] {
        BASIS_LABELS
    }

    /// The 2x2 block on `{H, V}`.
    pub fn qubit_block(&self) -> ComplexMatrix {
        let m = self.rho.matrix();
        ComplexMatrix::from_fn(2, 2, |i, j| m[(QUBIT_H + i, QUBIT_H + j)])
    }
}

pub fn money_state(k: StateIndex, mu: MeanPhotonNumber) -> MoneyState {
    let split = poisson_split(mu);
    let beta = squashed_qubit(k).beta;
    let mut rho = ComplexMatrix::zeros(STATE_DIM, STATE_DIM);
    rho[(VACUUM, VACUUM)] = Complex64::new(split.p0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            rho[(QUBIT_H + i, QUBIT_H + j)] = beta[i] * beta[j].conj() * split.p1;
        }
    }
    let flag = MULTIPHOTON_BASE + k.get();
    rho[(flag, flag)] = Complex64::new(split.p2plus, 0.0);
    MoneyState {
        k,
        mu,
        rho: HermitianOperator::from_hermitian_part(&rho),
    }
}

/// All four money states, in index order.
pub fn money_states(mu: MeanPhotonNumber) -> [MoneyState; 4] {
    StateIndex::ALL.map(|k| money_state(k, mu))
}

/// `conj(rho_k)`, as it enters the error and loss operators.
pub fn conjugate_state(s: &MoneyState) -> HermitianOperator {
    s.rho.conj()
}

/// The bank's average state `(1/4) sum_k rho_k`.
pub fn average_state(mu: MeanPhotonNumber) -> HermitianOperator {
    money_states(mu)
        .iter()
        .fold(HermitianOperator::zeros(STATE_DIM), |acc, s| {
            acc.add(&s.rho.scale(0.25))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, PSD_TOL};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mu(x: f64) -> MeanPhotonNumber {
        MeanPhotonNumber::new(x).unwrap()
    }

    fn k(i: usize) -> StateIndex {
        StateIndex::new(i).unwrap()
    }

    fn bra_ket(bra: &[Complex64; 2], m: &ComplexMatrix, ket: &[Complex64; 2]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += bra[i].conj() * m[(i, j)] * ket[j];
            }
        }
        acc
    }

    #[test]
    fn poisson_values() {
        let s = poisson_split(mu(1.0));
        assert_abs_diff_eq!(s.p0, 0.367879, epsilon = 1e-6);
        assert_abs_diff_eq!(s.p1, 0.367879, epsilon = 1e-6);
        assert_abs_diff_eq!(s.p2plus, 0.264241, epsilon = 1e-6);
        let s = poisson_split(mu(2.0));
        assert_abs_diff_eq!(s.p0, 0.135335, epsilon = 1e-6);
        assert_abs_diff_eq!(s.p1, 0.270671, epsilon = 1e-6);
        assert_abs_diff_eq!(s.p2plus, 0.593994, epsilon = 1e-6);
    }

    #[test]
    fn poisson_small_mu_limit() {
        let x = 1e-6;
        let s = poisson_split(mu(x));
        assert_abs_diff_eq!(s.p0, 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(s.p1 / x, 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(s.p2plus / (x * x / 2.0), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn invalid_inputs() {
        assert!(MeanPhotonNumber::new(0.0).is_err());
        assert!(MeanPhotonNumber::new(-1.0).is_err());
        assert!(MeanPhotonNumber::new(20.5).is_err());
        assert!(MeanPhotonNumber::new(f64::NAN).is_err());
        assert!(MeanPhotonNumber::new(20.0).is_ok());
        assert_eq!(StateIndex::new(4), Err(StateError::InvalidStateIndex(4)));
    }

    #[test]
    fn rho0_at_unit_mu() {
        let s = money_state(k(0), mu(1.0));
        let m = s.rho.matrix();
        let mut expected = [0.0; 7];
        expected[VACUUM] = 0.367879;
        expected[QUBIT_H] = 0.367879;
        expected[MULTIPHOTON_BASE] = 0.264241;
        for i in 0..7 {
            for j in 0..7 {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_abs_diff_eq!(m[(i, j)].re, want, epsilon = 1e-6);
                assert_eq!(m[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn rho1_has_circular_coherence() {
        let s = money_state(k(1), mu(1.0));
        let q = s.qubit_block();
        let p1 = 0.367879;
        assert_abs_diff_eq!(q[(0, 0)].re, 0.5 * p1, epsilon = 1e-6);
        assert_abs_diff_eq!(q[(1, 1)].re, 0.5 * p1, epsilon = 1e-6);
        // <H|rho|V> = beta_H conj(beta_V) = -i/2 under the sigma+ = (H + iV)/sqrt2 convention
        assert_abs_diff_eq!(q[(0, 1)].im, -0.5 * p1, epsilon = 1e-6);
        assert_abs_diff_eq!(q[(1, 0)].im, 0.5 * p1, epsilon = 1e-6);
    }

    #[test]
    fn squashed_qubits_match_assignment() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(squashed_qubit(k(0)).beta, [one, zero]);
        assert_eq!(squashed_qubit(k(0)).beta_perp, [zero, one]);
        assert_eq!(squashed_qubit(k(2)).beta, [zero, one]);
        assert_eq!(squashed_qubit(k(2)).beta_perp, [one, zero]);
        let q1 = squashed_qubit(k(1));
        let s = FRAC_1_SQRT_2;
        assert_eq!(q1.beta, [Complex64::new(s, 0.0), Complex64::new(0.0, s)]);
        assert_eq!(q1.beta_perp, [Complex64::new(s, 0.0), Complex64::new(0.0, -s)]);
        for i in 0..4 {
            let q = squashed_qubit(k(i));
            let norm: f64 = q.beta.iter().map(|z| z.norm_sqr()).sum();
            let overlap: Complex64 = q.beta.iter().zip(&q.beta_perp).map(|(a, b)| a.conj() * b).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            assert!(overlap.norm() < 1e-12);
        }
    }

    #[test]
    fn conjugation_swaps_circular_states() {
        let m = mu(1.3);
        let rho0 = money_state(k(0), m);
        assert_eq!(conjugate_state(&rho0), rho0.rho);

        let c1 = conjugate_state(&money_state(k(1), m));
        let rho3 = money_state(k(3), m);
        for i in 0..2 {
            for j in 0..2 {
                let diff = c1.matrix()[(QUBIT_H + i, QUBIT_H + j)] - rho3.rho.matrix()[(QUBIT_H + i, QUBIT_H + j)];
                assert!(diff.norm() < 1e-15);
            }
        }
        // multiphoton flag stays on m1
        assert_eq!(
            c1.matrix()[(MULTIPHOTON_BASE + 1, MULTIPHOTON_BASE + 1)].re,
            poisson_split(m).p2plus
        );
        assert_abs_diff_eq!(c1.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_of_rho0_form_a_distribution() {
        let e = crate::linalg::eig_hermitian(&money_state(k(0), mu(1.0)).rho).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| l >= -1e-14));
        assert_abs_diff_eq!(e.eigenvalues.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn poisson_split_sums_to_one(x in 1e-9f64..=20.0) {
            let s = poisson_split(mu(x));
            prop_assert!((s.p0 + s.p1 + s.p2plus - 1.0).abs() < 1e-12);
            for p in [s.p0, s.p1, s.p2plus] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }

        #[test]
        fn money_states_are_valid(x in 1e-6f64..=20.0) {
            let m = mu(x);
            let states = money_states(m);
            for s in &states {
                prop_assert!((s.rho.trace() - 1.0).abs() < 1e-12);
                prop_assert!(min_eigenvalue(&s.rho).unwrap() >= -PSD_TOL);
                let r = s.rho.matrix();
                // block diagonal across vacuum / qubit / multiphoton sectors
                let sector = |i: usize| if i == VACUUM { 0 } else if i < MULTIPHOTON_BASE { 1 } else { 2 };
                for i in 0..STATE_DIM {
                    for j in 0..STATE_DIM {
                        if sector(i) != sector(j) {
                            prop_assert_eq!(r[(i, j)], Complex64::new(0.0, 0.0));
                        }
                    }
                }
                let q = squashed_qubit(s.k);
                prop_assert!(bra_ket(&q.beta_perp, &s.qubit_block(), &q.beta_perp).norm() < 1e-12);
            }
            let lin = states[0].qubit_block().trace() + states[2].qubit_block().trace();
            let circ = states[1].qubit_block().trace() + states[3].qubit_block().trace();
            prop_assert!((lin - circ).norm() < 1e-12);
        }
    }
}
