//! Secret key rates for the strong-reference protocols and the two BB84
//! baselines (photon-number-splitting bounded and decoy state).

use crate::attack::{maximize_eve_information_with, AttackSolution, SearchOptions};
use crate::error::{check, Error, Result};
use crate::physics::{
    entropy, monitor_precision_delta, qber, signal_click_probability, DetectorConfig, Protocol, SetupConfig,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub protocol: Protocol,
    /// Sifted conclusive-bit rate, Hz.
    pub r_raw: f64,
    pub qber: f64,
    /// Bob's information per bit after error correction, `1 - f_ec H(QBER)`.
    pub i_ab: f64,
    /// Eve's information per bit.
    pub i_e: f64,
    /// Secret key rate, Hz, clamped at zero.
    pub r_sec: f64,
    /// Secret key per emitted pulse.
    pub per_pulse: f64,
    /// Secret key per pulse before clamping (may be negative).
    pub unclamped_per_pulse: f64,
}

impl RateBreakdown {
    pub fn clamped(&self) -> bool {
        self.unclamped_per_pulse <= 0.0
    }

    fn assemble(protocol: Protocol, f: f64, raw_per_pulse: f64, qber: f64, i_ab: f64, i_e: f64) -> Self {
        let unclamped = raw_per_pulse * (i_ab - i_e);
        let per_pulse = if i_ab > i_e { unclamped.max(0.0) } else { 0.0 };
        RateBreakdown {
            protocol,
            r_raw: f * raw_per_pulse,
            qber,
            i_ab,
            i_e,
            r_sec: f * per_pulse,
            per_pulse,
            unclamped_per_pulse: unclamped,
        }
    }
}

/// Key rate of a strong-reference protocol for a given value of Eve's
/// information.
pub fn sr_rate_with_eve_information(setup: &SetupConfig, detector: &DetectorConfig, i_e: f64) -> RateBreakdown {
    let raw = setup.protocol.sifting_factor() * signal_click_probability(detector.eta, setup.mu_prime());
    let q = qber(setup, detector).value;
    let i_ab = 1.0 - detector.f_ec * entropy(q);
    RateBreakdown::assemble(setup.protocol, setup.pulse_rate_hz, raw, q, i_ab, i_e)
}

/// Strong-reference rate together with the attack that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SrRate {
    pub rate: RateBreakdown,
    pub attack: AttackSolution,
}

pub fn sr_secret_rate(setup: &SetupConfig, detector: &DetectorConfig) -> Result<RateBreakdown> {
    sr_secret_rate_with(setup, detector, &SearchOptions::default()).map(|r| r.rate)
}

pub fn sr_secret_rate_with(setup: &SetupConfig, detector: &DetectorConfig, options: &SearchOptions) -> Result<SrRate> {
    if !setup.protocol.is_strong_reference() {
        return Err(Error::InvalidParameter {
            name: "protocol",
            value: f64::NAN,
            reason: "strong-reference rate requires b92-sr or bb84-sr",
        });
    }
    let delta = monitor_precision_delta(setup, detector).value;
    let attack = maximize_eve_information_with(setup, detector, delta, options)?;
    Ok(SrRate {
        rate: sr_rate_with_eve_information(setup, detector, attack.best.i_e),
        attack,
    })
}

/// Decoy-state intensities and the probability of sending a signal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyConfig {
    pub mu_sig: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub p_mu: f64,
}

/// `nu2 : nu1 : mu = 1 : 25 : 100`
pub const DEFAULT_DECOY_RATIOS: (f64, f64) = (0.25, 0.01);
pub const DEFAULT_P_MU: f64 = 0.5;

impl DecoyConfig {
    pub fn new(mu_sig: f64, nu1: f64, nu2: f64, p_mu: f64) -> Result<Self> {
        let cfg = DecoyConfig { mu_sig, nu1, nu2, p_mu };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Decoy intensities as fixed fractions of the signal intensity.
    pub fn from_ratios(mu_sig: f64, nu1_ratio: f64, nu2_ratio: f64, p_mu: f64) -> Result<Self> {
        DecoyConfig::new(mu_sig, mu_sig * nu1_ratio, mu_sig * nu2_ratio, p_mu)
    }

    pub fn with_default_ratios(mu_sig: f64) -> Result<Self> {
        let (r1, r2) = DEFAULT_DECOY_RATIOS;
        DecoyConfig::from_ratios(mu_sig, r1, r2, DEFAULT_P_MU)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.nu2 >= 0.0, "nu2", self.nu2, "must be non-negative")?;
        check(self.nu1 > self.nu2, "nu1", self.nu1, "must exceed nu2")?;
        check(self.mu_sig > self.nu1, "mu_sig", self.mu_sig, "must exceed nu1")?;
        check(
            self.mu_sig > self.nu1 + self.nu2,
            "mu_sig",
            self.mu_sig,
            "must exceed nu1 + nu2",
        )?;
        check(
            self.p_mu > 0.0 && self.p_mu <= 1.0,
            "p_mu",
            self.p_mu,
            "must lie in (0, 1]",
        )
    }
}

/// Gains, error rates and single-photon bounds of a BB84 run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bb84Yields {
    pub q_mu: f64,
    pub e_mu: f64,
    /// Background yield (measured lower bound for the decoy protocol).
    pub y0: f64,
    pub q1_lower: f64,
    pub e1_upper: f64,
}

/// Overall gain and error rate of a weak coherent pulse of `intensity`
/// sent through `length_km` of fiber without eavesdropping.
pub fn bb84_gain_error(intensity: f64, detector: &DetectorConfig, length_km: f64) -> Result<(f64, f64)> {
    bb84_gain_error_with_loss(
        intensity,
        detector,
        length_km,
        crate::physics::DEFAULT_FIBER_LOSS_DB_PER_KM,
    )
}

pub fn bb84_gain_error_with_loss(
    intensity: f64,
    detector: &DetectorConfig,
    length_km: f64,
    loss_db_per_km: f64,
) -> Result<(f64, f64)> {
    check(intensity >= 0.0, "intensity", intensity, "must be non-negative")?;
    let t = crate::physics::transmittance_with_loss(length_km, loss_db_per_km)?;
    let y0 = 2.0 * detector.p_dc;
    let detected = -(-detector.eta * intensity * t).exp_m1();
    let q = y0 + detected;
    let e = if q > 0.0 {
        (y0 / 2.0 + detector.p_opt * detected) / q
    } else {
        0.5
    };
    Ok((q, e))
}

/// `(e^(-eta mu) - eta e^(-mu)) / (1 - eta)`, continued to `eta -> 1`.
fn pns_tail_term(eta: f64, mu: f64) -> f64 {
    let gap = 1.0 - eta;
    if gap < 1e-6 {
        (1.0 + mu) * (-mu).exp() - mu * mu * (-mu).exp() * gap / 2.0
    } else {
        ((-eta * mu).exp() - eta * (-mu).exp()) / gap
    }
}

/// Single-photon bounds for BB84 without decoys, assuming Eve splits every
/// multi-photon pulse and forwards the rest losslessly.
pub fn bb84_pns_bounds(setup: &SetupConfig, detector: &DetectorConfig) -> Result<Bb84Yields> {
    setup.validate()?;
    detector.validate()?;
    let (q_mu, e_mu) = bb84_gain_error_with_loss(setup.mu, detector, setup.length_km, setup.fiber_loss_db_per_km)?;
    let q1 = q_mu - 1.0 + pns_tail_term(detector.eta, setup.mu);
    let q1_lower = q1.max(0.0);
    let e1_upper = if q1_lower > 0.0 {
        (q_mu * e_mu / q1_lower).clamp(0.0, 0.5)
    } else {
        0.5
    };
    Ok(Bb84Yields {
        q_mu,
        e_mu,
        y0: 2.0 * detector.p_dc,
        q1_lower,
        e1_upper,
    })
}

/// Vacuum + weak decoy bounds on the background yield, single-photon gain
/// and single-photon error rate, with the gains taken from the no-attack
/// channel model.
pub fn decoy_bounds(decoy: &DecoyConfig, detector: &DetectorConfig, length_km: f64) -> Result<Bb84Yields> {
    decoy_bounds_with_loss(decoy, detector, length_km, crate::physics::DEFAULT_FIBER_LOSS_DB_PER_KM)
}

pub fn decoy_bounds_with_loss(
    decoy: &DecoyConfig,
    detector: &DetectorConfig,
    length_km: f64,
    loss_db_per_km: f64,
) -> Result<Bb84Yields> {
    decoy.validate()?;
    detector.validate()?;
    let DecoyConfig {
        mu_sig: mu, nu1, nu2, ..
    } = *decoy;
    let gain = |x| bb84_gain_error_with_loss(x, detector, length_km, loss_db_per_km);
    let (q_mu, e_mu) = gain(mu)?;
    let (q1, e1) = gain(nu1)?;
    let (q2, e2) = gain(nu2)?;

    let y0 = ((nu1 * q2 * nu2.exp() - nu2 * q1 * nu1.exp()) / (nu1 - nu2)).max(0.0);
    let q1_lower = mu * mu * (-mu).exp() / ((nu1 - nu2) * (mu - nu1 - nu2))
        * (q1 * nu1.exp() - q2 * nu2.exp() - (nu1 * nu1 - nu2 * nu2) / (mu * mu) * (q_mu * mu.exp() - y0));
    let e1_upper = if q1_lower > 0.0 {
        ((e1 * q1 * nu1.exp() - e2 * q2 * nu2.exp()) * mu * (-mu).exp() / ((nu1 - nu2) * q1_lower)).clamp(0.0, 0.5)
    } else {
        0.5
    };
    Ok(Bb84Yields {
        q_mu,
        e_mu,
        y0,
        q1_lower: q1_lower.max(0.0),
        e1_upper,
    })
}

/// GLLP rate from single-photon bounds. `weight` is the probability that a
/// pulse is a signal state (1 without decoys).
pub fn bb84_secret_rate(
    protocol: Protocol,
    yields: &Bb84Yields,
    weight: f64,
    detector: &DetectorConfig,
    pulse_rate_hz: f64,
) -> RateBreakdown {
    let sift = 0.5 * weight;
    let raw = sift * yields.q_mu;
    let i_ab = 1.0 - detector.f_ec * entropy(yields.e_mu);
    // Everything outside the single-photon privacy term counts as leaked.
    let i_e = if yields.q_mu > 0.0 {
        1.0 - yields.q1_lower * (1.0 - entropy(yields.e1_upper)) / yields.q_mu
    } else {
        1.0
    };
    RateBreakdown::assemble(protocol, pulse_rate_hz, raw, yields.e_mu, i_ab, i_e)
}

pub fn standard_bb84_rate(setup: &SetupConfig, detector: &DetectorConfig) -> Result<RateBreakdown> {
    let yields = bb84_pns_bounds(setup, detector)?;
    Ok(bb84_secret_rate(
        Protocol::Bb84Standard,
        &yields,
        1.0,
        detector,
        setup.pulse_rate_hz,
    ))
}

/// Decoy-state BB84 rate. The setup supplies distance and pulse rate; the
/// signal intensity comes from `decoy`.
pub fn decoy_bb84_rate(setup: &SetupConfig, decoy: &DecoyConfig, detector: &DetectorConfig) -> Result<RateBreakdown> {
    setup.validate()?;
    let yields = decoy_bounds_with_loss(decoy, detector, setup.length_km, setup.fiber_loss_db_per_km)?;
    Ok(bb84_secret_rate(
        Protocol::Bb84Decoy,
        &yields,
        decoy.p_mu,
        detector,
        setup.pulse_rate_hz,
    ))
}

/// Decoy intensities expressed relative to the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyRatios {
    pub nu1: f64,
    pub nu2: f64,
    pub p_mu: f64,
}

impl Default for DecoyRatios {
    fn default() -> Self {
        DecoyRatios {
            nu1: DEFAULT_DECOY_RATIOS.0,
            nu2: DEFAULT_DECOY_RATIOS.1,
            p_mu: DEFAULT_P_MU,
        }
    }
}

impl DecoyRatios {
    pub fn config_for(&self, mu_sig: f64) -> Result<DecoyConfig> {
        DecoyConfig::from_ratios(mu_sig, self.nu1, self.nu2, self.p_mu)
    }
}

/// Rate for any protocol; decoy intensities follow `ratios` scaled to
/// `setup.mu`.
pub fn secret_rate(setup: &SetupConfig, detector: &DetectorConfig, ratios: &DecoyRatios) -> Result<RateBreakdown> {
    match setup.protocol {
        Protocol::B92Sr | Protocol::Bb84Sr => sr_secret_rate(setup, detector),
        Protocol::Bb84Standard => standard_bb84_rate(setup, detector),
        Protocol::Bb84Decoy => decoy_bb84_rate(setup, &ratios.config_for(setup.mu)?, detector),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup(protocol: Protocol, mu: f64, length_km: f64) -> SetupConfig {
        SetupConfig::new(protocol, mu, 65.0, length_km, 5e6).unwrap()
    }

    /// Single-photon gain and error rate of the no-attack model, summed
    /// term by term over the Poisson photon-number distribution.
    struct PoissonTruth {
        q_mu: f64,
        e_mu: f64,
        q1: f64,
        e1: f64,
    }

    fn poisson_truth(mu: f64, det: &DetectorConfig, length_km: f64) -> PoissonTruth {
        let t = 10f64.powf(-0.02 * length_km);
        let y0 = 2.0 * det.p_dc;
        let (mut q_mu, mut eq_mu) = (0.0, 0.0);
        let mut weight = (-mu).exp();
        let (mut q1, mut e1) = (0.0, 0.0);
        for n in 0..200 {
            if n > 0 {
                weight *= mu / n as f64;
            }
            let detect = 1.0 - (1.0 - det.eta * t).powi(n);
            let yn = y0 + detect;
            let en_yn = y0 / 2.0 + det.p_opt * detect;
            q_mu += weight * yn;
            eq_mu += weight * en_yn;
            if n == 1 {
                q1 = weight * yn;
                e1 = en_yn / yn;
            }
        }
        PoissonTruth {
            q_mu,
            e_mu: eq_mu / q_mu,
            q1,
            e1,
        }
    }

    #[test]
    fn sr_rate_at_reference_point() {
        let det = DetectorConfig::default();
        let r = sr_secret_rate(&setup(Protocol::B92Sr, 0.35, 10.0), &det).unwrap();
        // Close to the top of the mu-curve at 10 km.
        assert!(r.per_pulse > 0.026 && r.per_pulse < 0.028, "{}", r.per_pulse);
        assert_relative_eq!(r.r_sec, r.per_pulse * 5e6, max_relative = 1e-12);
        assert!(r.r_sec <= r.r_raw);
        let bb84 = sr_secret_rate(&setup(Protocol::Bb84Sr, 0.35, 10.0), &det).unwrap();
        assert_relative_eq!(bb84.per_pulse, r.per_pulse / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn sr_rate_vanishes_with_random_bits() {
        let det = DetectorConfig {
            p_opt: 0.49999,
            p_dc: 0.3,
            ..Default::default()
        };
        let r = sr_rate_with_eve_information(&setup(Protocol::B92Sr, 0.3, 10.0), &det, 0.0);
        assert!(r.qber > 0.49);
        assert_eq!(r.r_sec, 0.0);
        assert!(r.clamped());
    }

    #[test]
    fn sr_rate_zero_without_signal() {
        let det = DetectorConfig::default();
        let far = setup(Protocol::B92Sr, 0.3, 20_000.0);
        let r = sr_rate_with_eve_information(&far, &det, 0.0);
        assert_eq!(r.r_raw, 0.0);
        assert_eq!(r.r_sec, 0.0);
    }

    #[test]
    fn sr_rate_rejects_bb84_baselines() {
        let det = DetectorConfig::default();
        assert!(sr_secret_rate(&setup(Protocol::Bb84Decoy, 0.3, 10.0), &det).is_err());
    }

    #[test]
    fn forced_eve_information_extremes() {
        let det = DetectorConfig::default();
        let s = setup(Protocol::B92Sr, 0.3, 20.0);
        let free = sr_rate_with_eve_information(&s, &det, 0.0);
        let raw = signal_click_probability(det.eta, s.mu_prime());
        let expect = raw * (1.0 - det.f_ec * entropy(qber(&s, &det).value));
        assert_relative_eq!(free.per_pulse, expect, max_relative = 1e-14);
        assert_eq!(sr_rate_with_eve_information(&s, &det, 1.0).per_pulse, 0.0);
    }

    #[test]
    fn gain_error_examples() {
        let det = DetectorConfig::default();
        let (q, e) = bb84_gain_error(0.0, &det, 10.0).unwrap();
        assert_relative_eq!(q, 4e-5);
        assert_eq!(e, 0.5);
        let clean = DetectorConfig { p_dc: 0.0, ..det };
        let (_, e) = bb84_gain_error(0.3, &clean, 10.0).unwrap();
        assert_relative_eq!(e, 0.02, max_relative = 1e-12);
        let (q, e) = bb84_gain_error(0.1, &det, 20.0).unwrap();
        let detected = 1.0 - (-0.2f64 * 0.1 * 10f64.powf(-0.4)).exp();
        assert_relative_eq!(q, 4e-5 + detected, max_relative = 1e-12);
        assert_relative_eq!(e, (2e-5 + 0.02 * detected) / q, max_relative = 1e-12);
        let truth = poisson_truth(0.1, &det, 20.0);
        assert_relative_eq!(q, truth.q_mu, max_relative = 1e-12);
        assert_relative_eq!(e, truth.e_mu, max_relative = 1e-12);
        assert!(bb84_gain_error(-0.1, &det, 1.0).is_err());
    }

    #[test]
    fn pns_bound_below_true_single_photon_gain() {
        let det = DetectorConfig::default();
        for (mu, l) in [(0.1, 20.0), (0.05, 30.0), (0.3, 25.0)] {
            let y = bb84_pns_bounds(&setup(Protocol::Bb84Standard, mu, l), &det).unwrap();
            let truth = poisson_truth(mu, &det, l);
            assert!(y.q1_lower > 0.0);
            assert!(y.q1_lower < truth.q1, "mu={mu} L={l}");
        }
        let truth = poisson_truth(0.1, &det, 10.0);
        let closed = 0.1 * (-0.1f64).exp() * (4e-5 + 0.2 * 10f64.powf(-0.2));
        assert_relative_eq!(truth.q1, closed, max_relative = 1e-12);
    }

    #[test]
    fn pns_bound_exceeds_truth_on_short_links() {
        // With little loss Eve's lossless channel cannot reproduce the
        // observed multi-photon clicks, so the subtraction under-counts them.
        let det = DetectorConfig::default();
        let y = bb84_pns_bounds(&setup(Protocol::Bb84Standard, 0.1, 10.0), &det).unwrap();
        assert!(y.q1_lower > poisson_truth(0.1, &det, 10.0).q1);
    }

    #[test]
    fn pns_kills_standard_bb84_at_distance() {
        let det = DetectorConfig::default();
        let s = setup(Protocol::Bb84Standard, 0.1, 150.0);
        let y = bb84_pns_bounds(&s, &det).unwrap();
        assert_eq!(y.q1_lower, 0.0);
        assert_eq!(standard_bb84_rate(&s, &det).unwrap().r_sec, 0.0);
    }

    #[test]
    fn pns_tail_continuous_at_unit_efficiency() {
        for mu in [0.05, 0.5, 2.0] {
            let exact = pns_tail_term(1.0 - 1e-4, mu);
            let series = pns_tail_term(1.0 - 1e-7, mu);
            let limit = pns_tail_term(1.0, mu);
            assert!((exact - series).abs() < 1e-4);
            assert!((limit - (1.0 + mu) * (-mu).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn decoy_error_free_channel() {
        let det = DetectorConfig {
            p_dc: 0.0,
            p_opt: 0.0,
            ..Default::default()
        };
        let d = DecoyConfig::with_default_ratios(0.5).unwrap();
        let y = decoy_bounds(&d, &det, 20.0).unwrap();
        assert_eq!(y.e1_upper, 0.0);
        assert!(y.q1_lower > 0.0);
    }

    #[test]
    fn decoy_config_validation() {
        assert!(DecoyConfig::new(0.5, 0.125, 0.005, 0.5).is_ok());
        assert!(DecoyConfig::new(0.5, 0.3, 0.25, 0.5).is_err());
        assert!(DecoyConfig::new(0.5, 0.1, 0.2, 0.5).is_err());
        assert!(DecoyConfig::new(0.5, 0.125, 0.005, 0.0).is_err());
        let d = DecoyConfig::with_default_ratios(1.0).unwrap();
        assert_relative_eq!(d.nu1, 0.25);
        assert_relative_eq!(d.nu2, 0.01);
    }

    #[test]
    fn high_error_single_photons_give_no_key() {
        let y = Bb84Yields {
            q_mu: 1e-3,
            e_mu: 0.03,
            y0: 0.0,
            q1_lower: 5e-4,
            e1_upper: 0.5,
        };
        let r = bb84_secret_rate(Protocol::Bb84Standard, &y, 1.0, &DetectorConfig::default(), 1.0);
        assert_eq!(r.per_pulse, 0.0);
        assert!(r.unclamped_per_pulse < 0.0);
    }

    #[test]
    fn decoy_beats_standard_at_fifty_km() {
        let det = DetectorConfig::default();
        let decoy = decoy_bb84_rate(
            &setup(Protocol::Bb84Decoy, 0.5, 50.0),
            &DecoyConfig::with_default_ratios(0.5).unwrap(),
            &det,
        )
        .unwrap();
        let best_standard = crate::optimize::logspace(1e-3, 2.0, 200)
            .into_iter()
            .map(|mu| {
                standard_bb84_rate(&setup(Protocol::Bb84Standard, mu, 50.0), &det)
                    .unwrap()
                    .per_pulse
            })
            .fold(0.0, f64::max);
        assert!(decoy.per_pulse > best_standard);
    }

    #[test]
    fn secret_rate_dispatch() {
        let det = DetectorConfig::default();
        let ratios = DecoyRatios::default();
        for p in Protocol::ALL {
            let r = secret_rate(&setup(p, 0.3, 20.0), &det, &ratios).unwrap();
            assert_eq!(r.protocol, p);
            assert!(r.per_pulse >= 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn decoy_bounds_sandwich_truth(mu in 0.05..1.0f64, l in 0.0..120.0f64) {
            let det = DetectorConfig::default();
            let d = DecoyConfig::with_default_ratios(mu).unwrap();
            let y = decoy_bounds(&d, &det, l).unwrap();
            let truth = poisson_truth(mu, &det, l);
            prop_assert!(y.y0 <= 2.0 * det.p_dc * (1.0 + 1e-12));
            prop_assert!(y.q1_lower <= truth.q1 * (1.0 + 1e-12));
            prop_assert!(y.e1_upper >= truth.e1 * (1.0 - 1e-12) || y.q1_lower == 0.0);
        }

        #[test]
        fn per_pulse_bounded_by_sifting(mu in 0.01..1.5f64, l in 0.0..100.0f64) {
            let det = DetectorConfig::default();
            for p in Protocol::ALL {
                let s = setup(p, mu, l);
                let r = secret_rate(&s, &det, &DecoyRatios::default()).unwrap();
                prop_assert!(r.per_pulse >= 0.0);
                prop_assert!(r.per_pulse <= p.sifting_factor());
                prop_assert!(r.r_sec <= r.r_raw + 1e-12);
                prop_assert_eq!(r.per_pulse == 0.0, r.i_ab <= r.i_e || r.unclamped_per_pulse <= 0.0);
            }
        }
    }
}
