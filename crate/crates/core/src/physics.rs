//! Physical parameters of the link and the elementary functions built on
//! them: fiber transmittance, received intensities, reference-pulse
//! monitoring precision, the detector error model, binary entropy and the
//! Holevo quantity of a pair of phase-opposite coherent states.

use std::fmt;
use std::str::FromStr;

use crate::error::{check, Result};

/// Planck constant in J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Standard single-mode fiber attenuation at 1550 nm.
pub const DEFAULT_FIBER_LOSS_DB_PER_KM: f64 = 0.2;
/// Relative monitoring precision above which reference-pulse monitoring is
/// considered unusable.
pub const GREY_REGION_DELTA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Two-state protocol with a strong reference pulse.
    B92Sr,
    /// Four-state (4+2) protocol with a strong reference pulse.
    Bb84Sr,
    /// Weak-coherent-pulse BB84 without decoys, bounded against photon
    /// number splitting.
    Bb84Standard,
    /// Vacuum + weak decoy BB84.
    Bb84Decoy,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::B92Sr,
        Protocol::Bb84Sr,
        Protocol::Bb84Standard,
        Protocol::Bb84Decoy,
    ];

    /// Fraction of conclusive clicks kept after sifting.
    pub fn sifting_factor(self) -> f64 {
        match self {
            Protocol::B92Sr => 1.0,
            Protocol::Bb84Sr | Protocol::Bb84Standard | Protocol::Bb84Decoy => 0.5,
        }
    }

    /// Whether the protocol uses a strong reference pulse.
    pub fn is_strong_reference(self) -> bool {
        matches!(self, Protocol::B92Sr | Protocol::Bb84Sr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::B92Sr => "b92-sr",
            Protocol::Bb84Sr => "bb84-sr",
            Protocol::Bb84Standard => "bb84-standard",
            Protocol::Bb84Decoy => "bb84-decoy",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown protocol `{s}` (expected b92-sr, bb84-sr, bb84-standard or bb84-decoy)"))
    }
}

/// Protocol choice and source/link parameters of one setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupConfig {
    pub protocol: Protocol,
    /// Mean photon number of the signal pulse at Alice's output.
    pub mu: f64,
    /// Attenuation of the signal pulse relative to the reference pulse, dB.
    pub t_db: f64,
    pub length_km: f64,
    /// Pulse repetition frequency, Hz.
    pub pulse_rate_hz: f64,
    pub fiber_loss_db_per_km: f64,
}

impl SetupConfig {
    pub fn new(protocol: Protocol, mu: f64, t_db: f64, length_km: f64, pulse_rate_hz: f64) -> Result<Self> {
        let setup = SetupConfig {
            protocol,
            mu,
            t_db,
            length_km,
            pulse_rate_hz,
            fiber_loss_db_per_km: DEFAULT_FIBER_LOSS_DB_PER_KM,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.mu > 0.0 && self.mu.is_finite(), "mu", self.mu, "must be positive")?;
        check(self.t_db >= 0.0, "t_db", self.t_db, "must be non-negative")?;
        check(
            self.length_km >= 0.0 && self.length_km.is_finite(),
            "length_km",
            self.length_km,
            "must be non-negative",
        )?;
        check(
            self.pulse_rate_hz > 0.0 && self.pulse_rate_hz.is_finite(),
            "pulse_rate_hz",
            self.pulse_rate_hz,
            "must be positive",
        )?;
        check(
            self.fiber_loss_db_per_km >= 0.0 && self.fiber_loss_db_per_km.is_finite(),
            "fiber_loss_db_per_km",
            self.fiber_loss_db_per_km,
            "must be non-negative",
        )
    }

    pub fn with_mu(self, mu: f64) -> Self {
        SetupConfig { mu, ..self }
    }

    pub fn with_t_db(self, t_db: f64) -> Self {
        SetupConfig { t_db, ..self }
    }

    pub fn with_length_km(self, length_km: f64) -> Self {
        SetupConfig { length_km, ..self }
    }

    pub fn with_protocol(self, protocol: Protocol) -> Self {
        SetupConfig { protocol, ..self }
    }

    /// Reference pulse mean photon number, `mu * 10^(t/10)`.
    pub fn nu(&self) -> f64 {
        self.mu * 10f64.powf(self.t_db / 10.0)
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.fiber_loss_db_per_km * self.length_km / 10.0)
    }

    /// Expected signal intensity arriving at Bob.
    pub fn mu_prime(&self) -> f64 {
        self.mu * self.transmittance()
    }

    /// Expected reference intensity arriving at Bob.
    pub fn nu_prime(&self) -> f64 {
        self.nu() * self.transmittance()
    }
}

/// Bob's detection chain and post-processing efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Single-photon detector efficiency.
    pub eta: f64,
    /// Dark-count probability per detector per gate.
    pub p_dc: f64,
    /// Probability that a signal click lands on the wrong detector.
    pub p_opt: f64,
    /// Noise-equivalent power of the reference monitor, W/√Hz.
    pub nep: f64,
    /// Pulse width, s.
    pub tau_s: f64,
    /// Wavelength, m.
    pub lambda_m: f64,
    /// Error-correction inefficiency (1 = Shannon limit).
    pub f_ec: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            eta: 0.2,
            p_dc: 2e-5,
            p_opt: 0.02,
            nep: 25e-12,
            tau_s: 5e-9,
            lambda_m: 1550e-9,
            f_ec: 1.2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.eta > 0.0 && self.eta <= 1.0, "eta", self.eta, "must lie in (0, 1]")?;
        check(
            self.p_dc >= 0.0 && self.p_dc < 0.5,
            "p_dc",
            self.p_dc,
            "must lie in [0, 0.5)",
        )?;
        check(
            self.p_opt >= 0.0 && self.p_opt < 0.5,
            "p_opt",
            self.p_opt,
            "must lie in [0, 0.5)",
        )?;
        check(
            self.nep >= 0.0 && self.nep.is_finite(),
            "nep",
            self.nep,
            "must be non-negative",
        )?;
        check(
            self.tau_s >= 0.0 && self.tau_s.is_finite(),
            "tau_s",
            self.tau_s,
            "must be non-negative",
        )?;
        check(
            self.lambda_m > 0.0 && self.lambda_m.is_finite(),
            "lambda_m",
            self.lambda_m,
            "must be positive",
        )?;
        check(
            self.f_ec >= 1.0 && self.f_ec.is_finite(),
            "f_ec",
            self.f_ec,
            "must be at least 1",
        )
    }

    /// Photon-number uncertainty of the reference monitor,
    /// `NEP * sqrt(tau) * lambda / (h c)`.
    pub fn monitor_prefactor(&self) -> f64 {
        self.nep * self.tau_s.sqrt() * self.lambda_m / (PLANCK * SPEED_OF_LIGHT)
    }
}

/// Quantities derived from a setup and detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDerived {
    pub transmittance: f64,
    pub mu_prime: f64,
    pub nu_prime: f64,
    pub delta: f64,
    pub qber: f64,
    /// Monitoring precision worse than [`GREY_REGION_DELTA`].
    pub monitoring_unacceptable: bool,
    /// The error model exceeded 0.5 and was clamped.
    pub qber_clamped: bool,
}

impl ChannelDerived {
    pub fn new(setup: &SetupConfig, detector: &DetectorConfig) -> Self {
        let delta = monitor_precision_delta(setup, detector);
        let q = qber(setup, detector);
        ChannelDerived {
            transmittance: setup.transmittance(),
            mu_prime: setup.mu_prime(),
            nu_prime: setup.nu_prime(),
            delta: delta.value,
            qber: q.value,
            monitoring_unacceptable: delta.unacceptable,
            qber_clamped: q.clamped,
        }
    }
}

/// Fiber transmittance over `length_km` at 0.2 dB/km.
pub fn transmittance(length_km: f64) -> Result<f64> {
    transmittance_with_loss(length_km, DEFAULT_FIBER_LOSS_DB_PER_KM)
}

pub fn transmittance_with_loss(length_km: f64, loss_db_per_km: f64) -> Result<f64> {
    check(length_km >= 0.0, "length_km", length_km, "must be non-negative")?;
    check(
        loss_db_per_km >= 0.0,
        "fiber_loss_db_per_km",
        loss_db_per_km,
        "must be non-negative",
    )?;
    Ok(10f64.powf(-loss_db_per_km * length_km / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorPrecision {
    pub value: f64,
    pub unacceptable: bool,
}

/// Relative precision with which Bob can monitor the received reference
/// pulse intensity, limited by the monitor's noise-equivalent power.
pub fn monitor_precision_delta(setup: &SetupConfig, detector: &DetectorConfig) -> MonitorPrecision {
    let value = detector.monitor_prefactor() / setup.nu_prime();
    MonitorPrecision {
        value,
        unacceptable: value > GREY_REGION_DELTA,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberEstimate {
    pub value: f64,
    pub clamped: bool,
}

/// Probability that Bob gets a conclusive signal click, `1 - exp(-2 eta mu')`.
pub fn signal_click_probability(eta: f64, mu_prime: f64) -> f64 {
    -(-2.0 * eta * mu_prime).exp_m1()
}

/// Error rate among conclusive clicks: dark counts give a random bit, signal
/// clicks are wrong with probability `p_opt`.
pub fn qber_at(mu_prime: f64, detector: &DetectorConfig) -> QberEstimate {
    let click = signal_click_probability(detector.eta, mu_prime);
    let denom = 2.0 * detector.p_dc + click;
    if denom <= 0.0 {
        return QberEstimate {
            value: 0.5,
            clamped: false,
        };
    }
    let raw = (detector.p_dc + detector.p_opt * click) / denom;
    if raw > 0.5 {
        QberEstimate {
            value: 0.5,
            clamped: true,
        }
    } else {
        QberEstimate {
            value: raw,
            clamped: false,
        }
    }
}

pub fn qber(setup: &SetupConfig, detector: &DetectorConfig) -> QberEstimate {
    qber_at(setup.mu_prime(), detector)
}

/// Shannon binary entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check((0.0..=1.0).contains(&x), "x", x, "must lie in [0, 1]")?;
    Ok(entropy(x))
}

pub(crate) fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Holevo information of the ensemble `{|alpha>, |-alpha>}` with
/// `|alpha|^2 = intensity`, equiprobable.
pub fn holevo_chi(intensity: f64) -> Result<f64> {
    check(intensity >= 0.0, "intensity", intensity, "must be non-negative")?;
    Ok(chi(intensity))
}

pub(crate) fn chi(intensity: f64) -> f64 {
    if intensity.is_infinite() {
        return 1.0;
    }
    entropy(-(-2.0 * intensity).exp_m1() / 2.0)
}
