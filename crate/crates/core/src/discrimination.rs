//! Unambiguous discrimination of the coherent states `|alpha>` and
//! `|-alpha>`.
//!
//! The three-outcome measurement only acts on the two-dimensional span of
//! the states, so it is built there from an orthonormal basis
//! `{psi0, (psi1 - c psi0)/sqrt(1 - c^2)}` with `c` the (real) overlap. The
//! [`fock`] submodule repeats the construction in a truncated photon-number
//! basis and serves as an independent check.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

use crate::error::{check, Error, Result};
use crate::physics::{signal_click_probability, DetectorConfig, SetupConfig};

/// Two phase-opposite coherent states of equal intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentPair {
    pub mu: f64,
    pub cos_gamma: f64,
}

impl CoherentPair {
    pub fn new(mu: f64) -> Result<Self> {
        Ok(CoherentPair {
            mu,
            cos_gamma: overlap(mu)?,
        })
    }
}

/// `<alpha|-alpha> = exp(-2 mu)`.
pub fn overlap(mu: f64) -> Result<f64> {
    check(mu >= 0.0, "mu", mu, "must be non-negative")?;
    Ok((-2.0 * mu).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Zero,
    One,
    Inconclusive,
}

/// Measurement operators written in the orthonormal basis of the span of
/// the two states.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    pub m0: Matrix2<f64>,
    pub m1: Matrix2<f64>,
    pub m_inc: Matrix2<f64>,
    pub psi0: Vector2<f64>,
    pub psi1: Vector2<f64>,
    pub cos_gamma: f64,
}

impl PovmSet {
    pub const DIM: usize = 2;

    pub fn operator(&self, outcome: Outcome) -> &Matrix2<f64> {
        match outcome {
            Outcome::Zero => &self.m0,
            Outcome::One => &self.m1,
            Outcome::Inconclusive => &self.m_inc,
        }
    }

    /// `<psi_i| M_outcome |psi_i>` for the state encoding `bit`.
    pub fn probability(&self, outcome: Outcome, bit: u8) -> f64 {
        let psi = if bit == 0 { &self.psi0 } else { &self.psi1 };
        psi.dot(&(self.operator(outcome) * psi))
    }

    /// Largest elementwise deviation of `M0 + M1 + M? - 1`.
    pub fn completeness_residual(&self) -> f64 {
        (self.m0 + self.m1 + self.m_inc - Matrix2::identity()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        [&self.m0, &self.m1, &self.m_inc]
            .into_iter()
            .flat_map(|m| SymmetricEigen::new(*m).eigenvalues.iter().copied().collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Larger of the two wrong-outcome probabilities; zero for an ideal
    /// unambiguous measurement.
    pub fn cross_click(&self) -> f64 {
        self.probability(Outcome::Zero, 1)
            .abs()
            .max(self.probability(Outcome::One, 0).abs())
    }

    pub fn hermiticity_residual(&self) -> f64 {
        [&self.m0, &self.m1, &self.m_inc]
            .into_iter()
            .map(|m| (m - m.transpose()).amax())
            .fold(0.0, f64::max)
    }
}

/// Builds the optimal unambiguous discrimination measurement for two states
/// with overlap `cos_gamma`.
pub fn build_povm(cos_gamma: f64) -> Result<PovmSet> {
    check(
        (0.0..=1.0).contains(&cos_gamma),
        "cos_gamma",
        cos_gamma,
        "must lie in [0, 1)",
    )?;
    if cos_gamma >= 1.0 {
        return Err(Error::Indistinguishable(cos_gamma));
    }
    let sin_gamma = (1.0 - cos_gamma * cos_gamma).sqrt();
    let psi0 = Vector2::new(1.0, 0.0);
    let psi1 = Vector2::new(cos_gamma, sin_gamma);
    let id = Matrix2::identity();
    let norm = 1.0 + cos_gamma;
    let m0 = (id - psi1 * psi1.transpose()) / norm;
    let m1 = (id - psi0 * psi0.transpose()) / norm;
    let m_inc = id - m0 - m1;
    Ok(PovmSet {
        m0,
        m1,
        m_inc,
        psi0,
        psi1,
        cos_gamma,
    })
}

/// Ideal conclusive probability `1 - exp(-2 mu)`.
pub fn conclusive_prob_ideal(mu: f64) -> Result<f64> {
    check(mu >= 0.0, "mu", mu, "must be non-negative")?;
    Ok(-(-2.0 * mu).exp_m1())
}

/// Fraction of pulses that end up as sifted conclusive bits with a lossy
/// channel and finite detector efficiency. Dark counts are not included.
pub fn acceptance_rate(setup: &SetupConfig, detector: &DetectorConfig) -> f64 {
    setup.protocol.sifting_factor() * signal_click_probability(detector.eta, setup.mu_prime())
}

/// Photon-number-basis construction of the same measurement.
pub mod fock {
    use nalgebra::{DMatrix, DVector};

    use crate::error::{check, Result};

    #[derive(Debug, Clone, PartialEq)]
    pub struct FockCheck {
        pub dim: usize,
        /// Overlap from the truncated number-state sums.
        pub overlap: f64,
        /// Inconclusive probability for each input state.
        pub p_inconclusive: [f64; 2],
        /// `<psi1|M0|psi1>` and `<psi0|M1|psi0>`.
        pub cross_click: [f64; 2],
        /// Completeness residual against the projector onto the span.
        pub completeness_residual: f64,
    }

    /// Truncation dimension for which the Poisson tail mass beyond it is
    /// below `tail`.
    pub fn truncation_dim(mu: f64, tail: f64) -> usize {
        let mut term = (-mu).exp();
        let mut cumulative = term;
        let mut n = 0usize;
        while 1.0 - cumulative >= tail && n < 10_000 {
            n += 1;
            term *= mu / n as f64;
            cumulative += term;
        }
        // The subtraction above saturates near 1e-16; add a margin of terms.
        n + 1 + (4.0 * mu.sqrt()).ceil() as usize + 8
    }

    pub fn coherent_state(alpha: f64, dim: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        let mut amp = (-alpha * alpha / 2.0).exp();
        for n in 0..dim {
            if n > 0 {
                amp *= alpha / (n as f64).sqrt();
            }
            v[n] = amp;
        }
        v
    }

    pub fn check_povm(mu: f64, tail: f64) -> Result<FockCheck> {
        check(mu > 0.0, "mu", mu, "must be positive")?;
        let dim = truncation_dim(mu, tail);
        let alpha = mu.sqrt();
        let psi0 = coherent_state(alpha, dim);
        let psi1 = coherent_state(-alpha, dim);
        let overlap = psi0.dot(&psi1);

        let e0 = psi0.normalize();
        let r = &psi1 - &e0 * e0.dot(&psi1);
        let e1 = r.normalize();
        let span = &e0 * e0.transpose() + &e1 * e1.transpose();

        let norm = 1.0 + overlap;
        let m0 = (&span - &psi1 * psi1.transpose()) / norm;
        let m1 = (&span - &psi0 * psi0.transpose()) / norm;
        let m_inc = &span - &m0 - &m1;

        let expect = |m: &DMatrix<f64>, v: &DVector<f64>| v.dot(&(m * v));
        let completeness_residual = (&m0 + &m1 + &m_inc - &span).amax();
        Ok(FockCheck {
            dim,
            overlap,
            p_inconclusive: [expect(&m_inc, &psi0), expect(&m_inc, &psi1)],
            cross_click: [expect(&m0, &psi1), expect(&m1, &psi0)],
            completeness_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Protocol;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(0.0).unwrap(), 1.0);
        assert_relative_eq!(overlap(0.5).unwrap(), (-1f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(overlap(2.0).unwrap(), (-4f64).exp(), max_relative = 1e-15);
        assert!(overlap(-0.1).is_err());
        let pair = CoherentPair::new(0.7).unwrap();
        assert!((pair.cos_gamma - (-1.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_limit_is_projective() {
        let povm = build_povm(0.0).unwrap();
        assert_relative_eq!(povm.m0, povm.psi0 * povm.psi0.transpose(), epsilon = 1e-15);
        assert_relative_eq!(povm.m1, povm.psi1 * povm.psi1.transpose(), epsilon = 1e-15);
        assert!(povm.m_inc.amax() < 1e-15);
    }

    #[test]
    fn inconclusive_probability_equals_overlap() {
        let c = (-1f64).exp();
        let povm = build_povm(c).unwrap();
        for bit in [0, 1] {
            assert!((povm.probability(Outcome::Inconclusive, bit) - c).abs() < 1e-10);
        }
        assert!(povm.completeness_residual() < 1e-10);
    }

    #[test]
    fn degenerate_overlap_rejected() {
        assert!(matches!(build_povm(1.0), Err(Error::Indistinguishable(_))));
        assert!(build_povm(-0.1).is_err());
        assert!(build_povm(1.5).is_err());
    }

    #[test]
    fn ideal_conclusive_probability() {
        assert_eq!(conclusive_prob_ideal(0.0).unwrap(), 0.0);
        assert_relative_eq!(conclusive_prob_ideal(40.0).unwrap(), 1.0);
        assert_relative_eq!(
            conclusive_prob_ideal(0.5).unwrap(),
            1.0 - (-1f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn acceptance_rate_examples() {
        let det = DetectorConfig::default();
        let b92 = SetupConfig::new(Protocol::B92Sr, 0.3, 65.0, 10.0, 5e6).unwrap();
        let rate = acceptance_rate(&b92, &det);
        assert_relative_eq!(rate, 0.072_919_503_168_280_33, max_relative = 1e-10);
        let bb84 = b92.with_protocol(Protocol::Bb84Sr);
        assert_relative_eq!(acceptance_rate(&bb84, &det), rate / 2.0, max_relative = 1e-15);
        // Infinite loss leaves nothing to accept.
        let dark = b92.with_length_km(1e5);
        assert!(acceptance_rate(&dark, &det) < 1e-300);
    }

    #[test]
    fn fock_basis_agrees_with_span_construction() {
        for mu in [0.05, 0.3, 1.0, 2.5] {
            let fock = fock::check_povm(mu, 1e-12).unwrap();
            let c = overlap(mu).unwrap();
            assert!((fock.overlap - c).abs() < 1e-12, "mu={mu}");
            for p in fock.p_inconclusive {
                assert!((p - c).abs() < 1e-10, "mu={mu}");
            }
            for p in fock.cross_click {
                assert!(p.abs() < 1e-10);
            }
            assert!(fock.completeness_residual < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn povm_identities(mu in 1e-6..=3.0f64) {
            let c = overlap(mu).unwrap();
            let povm = build_povm(c).unwrap();
            prop_assert!(povm.completeness_residual() < 1e-10);
            prop_assert!(povm.min_eigenvalue() > -1e-10);
            prop_assert!(povm.cross_click() < 1e-10);
            prop_assert!(povm.hermiticity_residual() < 1e-15);
            let p_inc = povm.probability(Outcome::Inconclusive, 0);
            prop_assert!((p_inc - c).abs() < 1e-10);
            prop_assert!((conclusive_prob_ideal(mu).unwrap() + c - 1.0).abs() < 1e-12);
        }

        #[test]
        fn acceptance_is_ideal_at_effective_intensity(mu in 0.01..2.0f64, l in 0.0..100.0f64) {
            let det = DetectorConfig::default();
            let setup = SetupConfig::new(Protocol::B92Sr, mu, 65.0, l, 5e6).unwrap();
            let ideal = conclusive_prob_ideal(det.eta * setup.mu_prime()).unwrap();
            prop_assert!((acceptance_rate(&setup, &det) - ideal).abs() < 1e-15);
        }
    }
}
