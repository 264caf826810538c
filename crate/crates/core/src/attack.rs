//! Soft-filtering attack on strong-reference-pulse QKD.
//!
//! Eve applies a two-outcome probabilistic filter to the signal: on success
//! (probability `p`) the signal intensity becomes `a*mu` with `a > 1`, on
//! failure `b*mu` with `b < 1`. She forwards `mu'(1 + delta)` photons to Bob
//! after a success and `mu'(1 - delta)` after a failure, which keeps Bob's
//! reference-pulse monitor within its precision window and preserves his
//! expected conclusive-click rate. What she keeps is measured collectively.
//!
//! The overlap-preservation constraint fixes `a` given `b`, the rate
//! constraint fixes `p`, leaving `b` as the only free parameter.

use crate::error::{check, Error, Result};
use crate::optimize::{grid_then_golden, linspace};
use crate::physics::{
    chi, monitor_precision_delta, signal_click_probability, DetectorConfig, SetupConfig, GREY_REGION_DELTA,
};

/// Holevo arguments this far below zero are treated as rounding at a
/// feasibility boundary.
const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Probability of the success outcome that keeps Bob's conclusive rate
/// unchanged: `1 / (1 + exp(-2 eta mu' delta))`.
pub fn success_probability(eta: f64, mu_prime: f64, delta: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * eta * mu_prime * delta).exp())
}

/// Amplification coefficient `a` that, together with `b` and the success
/// probability, preserves the overlap of the two signal states.
pub fn amplification(b: f64, mu: f64, eta: f64, mu_prime: f64, delta: f64) -> Result<f64> {
    check(mu > 0.0, "mu", mu, "must be positive")?;
    let arg = 1.0 - (-2.0 * eta * mu_prime * delta).exp() * (2.0 * mu * (1.0 - b)).exp_m1();
    if arg.is_nan() || arg <= 0.0 || arg.is_infinite() {
        return Err(Error::InfeasibleAttack {
            b,
            reason: "overlap constraint has no finite amplification",
        });
    }
    Ok(1.0 - arg.ln() / (2.0 * mu))
}

/// Range of attenuation coefficients for which the attack is realizable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BInterval {
    pub b_min: f64,
    pub b_max: f64,
    /// Lower bound from requiring a finite amplification.
    pub lower_from_amplification: f64,
    /// Lower bound from Eve keeping a non-negative share after failure.
    pub lower_from_intensity: f64,
}

impl BInterval {
    pub fn is_empty(&self) -> bool {
        self.b_min >= self.b_max
    }

    pub fn contains(&self, b: f64) -> bool {
        b >= self.b_min && b <= self.b_max
    }
}

pub fn b_interval(setup: &SetupConfig, detector: &DetectorConfig, delta: f64) -> Result<BInterval> {
    check(delta >= 0.0, "delta", delta, "must be non-negative")?;
    let mu = setup.mu;
    let mu_prime = setup.mu_prime();
    let x = 2.0 * detector.eta * mu_prime * delta;

    // ln(1 + e^x) computed without overflow for large x.
    let softplus = if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    let lower_from_amplification = 1.0 - softplus / (2.0 * mu);
    let lower_from_intensity = (1.0 - delta) * setup.transmittance();
    // Negative b would be a negative intensity after failure.
    let b_min = lower_from_amplification.max(lower_from_intensity).max(0.0);

    // Eve must keep a non-negative share after success too; when the signal
    // already exceeds mu'(1 + delta) at a = 1 this holds for every b < 1.
    let arg = 1.0 - x.exp() * (2.0 * mu - 2.0 * mu_prime * (1.0 + delta)).exp_m1();
    let b_max = if arg > 0.0 && arg.is_finite() {
        (1.0 - arg.ln() / (2.0 * mu)).min(1.0)
    } else {
        1.0
    };

    Ok(BInterval {
        b_min,
        b_max,
        lower_from_amplification,
        lower_from_intensity,
    })
}

/// One fully resolved attack configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPoint {
    pub b: f64,
    pub p: f64,
    pub a: f64,
    /// Intensity forwarded to Bob after success.
    pub beta_s_sq: f64,
    /// Intensity forwarded to Bob after failure.
    pub beta_f_sq: f64,
    /// Intensity Eve keeps after success.
    pub eps_s_sq: f64,
    /// Intensity Eve keeps after failure.
    pub eps_f_sq: f64,
    /// Eve's information per conclusive bit.
    pub i_e: f64,
}

impl AttackPoint {
    /// `|p e^(-2 a mu) + (1 - p) e^(-2 b mu) - e^(-2 mu)|`
    pub fn unitarity_residual(&self, mu: f64) -> f64 {
        (self.p * (-2.0 * self.a * mu).exp() + (1.0 - self.p) * (-2.0 * self.b * mu).exp() - (-2.0 * mu).exp()).abs()
    }

    /// Deviation of Bob's conclusive-click probability from its no-attack
    /// value.
    pub fn rate_residual(&self, eta: f64, mu_prime: f64) -> f64 {
        (self.p * signal_click_probability(eta, self.beta_s_sq)
            + (1.0 - self.p) * signal_click_probability(eta, self.beta_f_sq)
            - signal_click_probability(eta, mu_prime))
        .abs()
    }

    fn beam_splitting(setup: &SetupConfig, detector: &DetectorConfig, delta: f64) -> Self {
        let mu_prime = setup.mu_prime();
        let kept = (setup.mu - mu_prime).max(0.0);
        AttackPoint {
            b: 1.0,
            p: success_probability(detector.eta, mu_prime, delta),
            a: 1.0,
            beta_s_sq: mu_prime,
            beta_f_sq: mu_prime,
            eps_s_sq: kept,
            eps_f_sq: kept,
            i_e: chi(kept),
        }
    }
}

fn retained(intensity: f64, b: f64) -> Result<f64> {
    if intensity >= 0.0 {
        Ok(intensity)
    } else if intensity >= -BOUNDARY_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::InfeasibleAttack {
            b,
            reason: "forwarded intensity exceeds the filtered signal",
        })
    }
}

/// Resolves `p`, `a` and the intensity split for a given `b` and evaluates
/// Eve's information.
pub fn attack_point(b: f64, setup: &SetupConfig, detector: &DetectorConfig, delta: f64) -> Result<AttackPoint> {
    check(delta >= 0.0, "delta", delta, "must be non-negative")?;
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::InfeasibleAttack {
            b,
            reason: "attenuation must lie in [0, 1]",
        });
    }
    let mu = setup.mu;
    let eta = detector.eta;
    let mu_prime = setup.mu_prime();
    let p = success_probability(eta, mu_prime, delta);
    let a = amplification(b, mu, eta, mu_prime, delta)?;
    let beta_s_sq = mu_prime * (1.0 + delta);
    let beta_f_sq = mu_prime * (1.0 - delta);
    let eps_s_sq = retained(a * mu - beta_s_sq, b)?;
    let eps_f_sq = retained(b * mu - beta_f_sq, b)?;

    let click = signal_click_probability(eta, mu_prime);
    let i_e = if click > 0.0 {
        let success = p * signal_click_probability(eta, beta_s_sq) * chi(eps_s_sq);
        let failure = (1.0 - p) * signal_click_probability(eta, beta_f_sq) * chi(eps_f_sq);
        ((success + failure) / click).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(AttackPoint {
        b,
        p,
        a,
        beta_s_sq,
        beta_f_sq,
        eps_s_sq,
        eps_f_sq,
        i_e,
    })
}

/// Eve's information (bits per conclusive bit) for attenuation `b`.
pub fn eve_information(b: f64, setup: &SetupConfig, detector: &DetectorConfig, delta: f64) -> Result<f64> {
    attack_point(b, setup, detector, delta).map(|pt| pt.i_e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Number of evenly spaced `b` values in the coarse scan.
    pub grid_points: usize,
    /// Bracket width at which golden-section refinement stops.
    pub b_tol: f64,
    /// Keep every scanned `(b, I_E)` pair in the solution.
    pub keep_trace: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            grid_points: 2000,
            b_tol: 1e-12,
            keep_trace: false,
        }
    }
}

/// Result of maximizing Eve's information over `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSolution {
    pub best: AttackPoint,
    pub b_min: f64,
    pub b_max: f64,
    pub delta: f64,
    /// The feasible interval was empty and the plain beam-splitting attack
    /// was used instead.
    pub beam_splitting_fallback: bool,
    pub monitoring_unacceptable: bool,
    pub scan_trace: Vec<(f64, f64)>,
}

/// Maximizes Eve's information with the monitoring precision implied by the
/// setup and detector.
pub fn maximize_eve_information(setup: &SetupConfig, detector: &DetectorConfig) -> Result<AttackSolution> {
    let delta = monitor_precision_delta(setup, detector).value;
    maximize_eve_information_with(setup, detector, delta, &SearchOptions::default())
}

pub fn maximize_eve_information_with(
    setup: &SetupConfig,
    detector: &DetectorConfig,
    delta: f64,
    options: &SearchOptions,
) -> Result<AttackSolution> {
    setup.validate()?;
    detector.validate()?;
    check(
        options.grid_points >= 2,
        "grid_points",
        options.grid_points as f64,
        "must be at least 2",
    )?;
    let interval = b_interval(setup, detector, delta)?;
    let monitoring_unacceptable = delta > GREY_REGION_DELTA;

    let fallback = |trace| AttackSolution {
        best: AttackPoint::beam_splitting(setup, detector, delta),
        b_min: interval.b_min,
        b_max: interval.b_max,
        delta,
        beam_splitting_fallback: true,
        monitoring_unacceptable,
        scan_trace: trace,
    };

    if interval.is_empty() {
        return Ok(fallback(Vec::new()));
    }

    let grid = linspace(interval.b_min, interval.b_max, options.grid_points);
    let scan_trace: Vec<(f64, f64)> = if options.keep_trace {
        grid.iter()
            .filter_map(|&b| eve_information(b, setup, detector, delta).ok().map(|v| (b, v)))
            .collect()
    } else {
        Vec::new()
    };
    let objective = |b: f64| eve_information(b, setup, detector, delta).ok();
    let Some(max) = grid_then_golden(objective, &grid, options.b_tol) else {
        return Ok(fallback(scan_trace));
    };
    let best = attack_point(max.x, setup, detector, delta)?;

    Ok(AttackSolution {
        best,
        b_min: interval.b_min,
        b_max: interval.b_max,
        delta,
        beam_splitting_fallback: false,
        monitoring_unacceptable,
        scan_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{holevo_chi, Protocol};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup(mu: f64, t_db: f64, length_km: f64) -> SetupConfig {
        SetupConfig::new(Protocol::B92Sr, mu, t_db, length_km, 5e6).unwrap()
    }

    /// Eve's information written out term by term, independent of
    /// `attack_point`: `p` from the rate constraint in its ratio form and `a`
    /// from the overlap constraint in its direct logarithmic form.
    fn eve_information_direct(b: f64, mu: f64, length_km: f64, eta: f64, delta: f64) -> f64 {
        let mu_prime = mu * 10f64.powf(-0.2 * length_km / 10.0);
        let mu_max = mu_prime * (1.0 + delta);
        let mu_min = mu_prime * (1.0 - delta);
        let p = ((-2.0 * eta * mu_min).exp() - (-2.0 * eta * mu_prime).exp())
            / ((-2.0 * eta * mu_min).exp() - (-2.0 * eta * mu_max).exp());
        let a = -1.0 / (2.0 * mu) * (((-2.0 * mu).exp() - (1.0 - p) * (-2.0 * b * mu).exp()) / p).ln();
        let h = |x: f64| -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
        let chi = |m: f64| h((1.0 - (-2.0 * m).exp()) / 2.0);
        let num = p * (1.0 - (-2.0 * eta * mu_max).exp()) * chi(a * mu - mu_max)
            + (1.0 - p) * (1.0 - (-2.0 * eta * mu_min).exp()) * chi(b * mu - mu_min);
        num / (1.0 - (-2.0 * eta * mu_prime).exp())
    }

    #[test]
    fn success_probability_examples() {
        assert_eq!(success_probability(0.2, 0.3, 0.0), 0.5);
        assert_relative_eq!(success_probability(0.2, 0.3, 1e4), 1.0);
        assert_relative_eq!(
            success_probability(0.2, 0.1893, 0.0231),
            0.500_437_282_888_512_5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn amplification_identity_and_boundary() {
        assert_relative_eq!(amplification(1.0, 0.3, 0.2, 0.19, 0.02).unwrap(), 1.0, epsilon = 1e-15);
        let s = setup(0.3, 65.0, 10.0);
        let det = DetectorConfig::default();
        let delta = monitor_precision_delta(&s, &det).value;
        let interval = b_interval(&s, &det, delta).unwrap();
        // The finite-amplification bound sits just below zero here; probe
        // it directly.
        let edge = interval.lower_from_amplification;
        let near = edge + 1e-9;
        let a = amplification(near, s.mu, det.eta, s.mu_prime(), delta).unwrap();
        assert!(a.is_finite() && a > 10.0, "a = {a}");
        assert!(amplification(edge - 1e-6, s.mu, det.eta, s.mu_prime(), delta).is_err());
    }

    #[test]
    fn reference_interval_is_consistent() {
        let s = setup(0.3, 65.0, 10.0);
        let det = DetectorConfig::default();
        let delta = monitor_precision_delta(&s, &det).value;
        let iv = b_interval(&s, &det, delta).unwrap();
        assert!(!iv.is_empty());
        assert_eq!(iv.b_max, 1.0);
        // Brute force: every interior b yields a > 1 and non-negative shares.
        for b in linspace(iv.b_min, iv.b_max, 501).into_iter().skip(1).take(499) {
            let pt = attack_point(b, &s, &det, delta).unwrap();
            assert!(pt.a > 1.0);
            assert!(pt.beta_f_sq < b * s.mu);
            assert!(pt.beta_s_sq < pt.a * s.mu);
        }
        // Just outside the interval the intensity constraint fails.
        assert!(attack_point(iv.b_min - 1e-6, &s, &det, delta).is_err());
    }

    #[test]
    fn zero_delta_keeps_b_max_at_one() {
        let det = DetectorConfig::default();
        for l in [0.5, 10.0, 80.0] {
            let iv = b_interval(&setup(0.3, 65.0, l), &det, 0.0).unwrap();
            assert_eq!(iv.b_max, 1.0);
        }
    }

    #[test]
    fn short_link_limits_b_max() {
        // At L = 0 the success branch must still leave Eve something, so
        // b_max < 1 whenever delta > 0.
        let det = DetectorConfig::default();
        let iv = b_interval(&setup(0.3, 65.0, 0.0), &det, 0.05).unwrap();
        assert!(iv.b_max < 1.0);
        let pt = attack_point(iv.b_max, &setup(0.3, 65.0, 0.0), &det, 0.05).unwrap();
        assert!(pt.eps_s_sq.abs() < 1e-12);
    }

    #[test]
    fn both_lower_bound_branches_occur() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 65.0, 10.0);
        let small = b_interval(&s, &det, 0.02).unwrap();
        assert!(small.lower_from_intensity > small.lower_from_amplification);
        assert_eq!(small.b_min, small.lower_from_intensity);
        let s = setup(1.0, 65.0, 1.0);
        let big = b_interval(&s, &det, 0.9).unwrap();
        assert!(big.lower_from_amplification > big.lower_from_intensity);
        assert_eq!(big.b_min, big.lower_from_amplification);
        let s = setup(0.3, 65.0, 10.0);
        let huge = b_interval(&s, &det, 40.0).unwrap();
        assert!(huge.lower_from_amplification < 0.0);
        assert_eq!(huge.b_min, 0.0);
    }

    #[test]
    fn beam_splitting_reductions() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 65.0, 10.0);
        let ie = eve_information(1.0, &s, &det, 0.0).unwrap();
        assert_relative_eq!(ie, holevo_chi(s.mu - s.mu_prime()).unwrap(), max_relative = 1e-12);
        let s0 = setup(0.3, 65.0, 0.0);
        assert!(eve_information(1.0, &s0, &det, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn matches_direct_formula_at_interior_points() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 65.0, 10.0);
        let delta = monitor_precision_delta(&s, &det).value;
        let iv = b_interval(&s, &det, delta).unwrap();
        for frac in [0.1, 0.37, 0.5, 0.81, 0.99] {
            let b = iv.b_min + frac * (iv.b_max - iv.b_min);
            let got = eve_information(b, &s, &det, delta).unwrap();
            let want = eve_information_direct(b, s.mu, s.length_km, det.eta, delta);
            assert!((got - want).abs() < 1e-9, "b={b}: {got} vs {want}");
        }
    }

    #[test]
    fn optimizer_zero_delta_returns_beam_splitting() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 65.0, 10.0);
        let sol = maximize_eve_information_with(&s, &det, 0.0, &SearchOptions::default()).unwrap();
        let bs = holevo_chi(s.mu - s.mu_prime()).unwrap();
        assert!((sol.best.i_e - bs).abs() < 1e-8);
        assert!(1.0 - sol.best.b < 1e-6);
    }

    #[test]
    fn optimizer_dominates_b_equal_one() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 65.0, 10.0);
        let sol = maximize_eve_information(&s, &det).unwrap();
        let at_one = eve_information(1.0, &s, &det, sol.delta).unwrap();
        assert!(sol.best.i_e >= at_one - 1e-9);
        assert!(sol.best.i_e >= holevo_chi(s.mu - s.mu_prime()).unwrap());
        assert!(!sol.beam_splitting_fallback);
        assert!(sol.b_min <= sol.best.b && sol.best.b <= sol.b_max);
    }

    #[test]
    fn optimizer_refines_grid_optimum() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 60.0, 10.0);
        let delta = monitor_precision_delta(&s, &det).value;
        let coarse = maximize_eve_information_with(
            &s,
            &det,
            delta,
            &SearchOptions {
                keep_trace: true,
                ..Default::default()
            },
        )
        .unwrap();
        let grid_best = coarse.scan_trace.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        assert!(coarse.best.i_e >= grid_best);
        let fine = maximize_eve_information_with(
            &s,
            &det,
            delta,
            &SearchOptions {
                grid_points: 40_000,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((coarse.best.i_e - fine.best.i_e).abs() < 1e-6);
    }

    #[test]
    fn grey_region_still_solved() {
        let det = DetectorConfig::default();
        let s = setup(0.2, 50.0, 10.0);
        let sol = maximize_eve_information(&s, &det).unwrap();
        assert!(sol.delta > 0.5);
        assert!(sol.monitoring_unacceptable);
        assert!((0.0..=1.0).contains(&sol.best.i_e));
    }

    #[test]
    fn empty_interval_falls_back() {
        let det = DetectorConfig::default();
        // A monitor this poor pushes the upper bound below zero.
        let s = setup(0.3, 65.0, 10.0);
        let delta = 40.0;
        let iv = b_interval(&s, &det, delta).unwrap();
        assert!(iv.is_empty(), "{iv:?}");
        let sol = maximize_eve_information_with(&s, &det, delta, &SearchOptions::default()).unwrap();
        assert!(sol.beam_splitting_fallback);
        assert_eq!(sol.best.i_e, holevo_chi(s.mu - s.mu_prime()).unwrap());
        assert!(sol.best.rate_residual(det.eta, s.mu_prime()) < 1e-15);
    }

    #[test]
    fn infeasible_b_rejected() {
        let det = DetectorConfig::default();
        let s = setup(0.3, 65.0, 10.0);
        assert!(eve_information(1.2, &s, &det, 0.02).is_err());
        assert!(eve_information(-0.1, &s, &det, 0.02).is_err());
        assert!(eve_information(0.1, &s, &det, 0.02).is_err());
    }

    #[test]
    fn optimum_nondecreasing_in_delta() {
        let det = DetectorConfig::default();
        let opts = SearchOptions {
            grid_points: 600,
            ..Default::default()
        };
        for mu in linspace(0.05, 1.0, 10) {
            let s = setup(mu, 65.0, 10.0);
            let mut prev = f64::NEG_INFINITY;
            for delta in linspace(0.0, 0.9, 10) {
                let v = maximize_eve_information_with(&s, &det, delta, &opts).unwrap().best.i_e;
                assert!(v >= prev - 1e-9, "mu={mu} delta={delta}: {v} < {prev}");
                prev = v;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn feasible_points_satisfy_constraints(
            mu in 0.02..1.5f64,
            l in 0.0..100.0f64,
            delta in 0.0..0.5f64,
            frac in 0.0..=1.0f64,
        ) {
            let det = DetectorConfig::default();
            let s = setup(mu, 65.0, l);
            let iv = b_interval(&s, &det, delta).unwrap();
            prop_assume!(!iv.is_empty());
            let b = iv.b_min + frac * (iv.b_max - iv.b_min);
            if let Ok(pt) = attack_point(b, &s, &det, delta) {
                prop_assert!(pt.unitarity_residual(mu) < 1e-9);
                prop_assert!(pt.rate_residual(det.eta, s.mu_prime()) < 1e-9);
                prop_assert!(pt.eps_s_sq >= -1e-12 && pt.eps_f_sq >= -1e-12);
                prop_assert!((0.0..=1.0).contains(&pt.i_e));
            }
        }

        #[test]
        fn optimum_dominates_endpoints(mu in 0.05..1.0f64, l in 0.0..80.0f64, t in 50.0..80.0f64) {
            let det = DetectorConfig::default();
            let s = setup(mu, t, l);
            let opts = SearchOptions { grid_points: 400, ..Default::default() };
            let delta = monitor_precision_delta(&s, &det).value;
            let sol = maximize_eve_information_with(&s, &det, delta, &opts).unwrap();
            prop_assert!((0.0..=1.0).contains(&sol.best.i_e));
            if !sol.beam_splitting_fallback {
                for b in [sol.b_min, sol.b_max] {
                    if let Ok(v) = eve_information(b, &s, &det, delta) {
                        prop_assert!(sol.best.i_e >= v - 1e-9);
                    }
                }
            }
        }
    }
}
