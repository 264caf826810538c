//! Pulse-level Monte Carlo of Bob's two-detector receiver, used to check the
//! analytic error and acceptance models by sampling.
//!
//! Each pulse produces a signal click with probability `1 - exp(-2 eta I)`
//! where `I` is the intensity reaching Bob; the click lands on the wrong
//! detector with probability `p_opt`. Each detector also fires a dark count
//! with probability `p_dc`, independently.
//!
//! Pulses are processed in fixed-size blocks, each with its own ChaCha
//! stream selected by block index, so results depend only on the seed and
//! not on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::AttackPoint;
use crate::error::{check, Result};
use crate::physics::{signal_click_probability, DetectorConfig, SetupConfig};

const BLOCK_PULSES: u64 = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimAttack {
    None,
    /// Eve keeps the channel loss for herself and forwards `mu'` losslessly.
    BeamSplit,
    /// Eve forwards `beta_s_sq` with probability `p`, else `beta_f_sq`.
    SoftFilter(AttackPoint),
}

/// What to do when both detectors fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoubleClickPolicy {
    #[default]
    Discard,
    /// Keep the pulse and assign a uniformly random bit.
    RandomBit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub attack: SimAttack,
    pub double_click: DoubleClickPolicy,
}

impl SimConfig {
    pub fn new(n_pulses: u64, seed: u64) -> Self {
        SimConfig {
            n_pulses,
            seed,
            attack: SimAttack::None,
            double_click: DoubleClickPolicy::Discard,
        }
    }

    pub fn with_attack(self, attack: SimAttack) -> Self {
        SimConfig { attack, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }
}

/// Wilson score interval for `successes` out of `trials` at `z` standard
/// deviations.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lower: 0.0, upper: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub n_pulses: u64,
    pub conclusive_count: u64,
    pub error_count: u64,
    pub double_clicks: u64,
    pub qber_hat: f64,
    /// Conclusive clicks per emitted pulse.
    pub rate_hat: f64,
    pub qber_ci95: Interval,
    pub rate_ci95: Interval,
}

impl SimResult {
    /// One-sigma Wilson half-width of the QBER estimate.
    pub fn qber_sigma(&self) -> f64 {
        wilson_interval(self.error_count, self.conclusive_count, 1.0).half_width()
    }

    pub fn rate_sigma(&self) -> f64 {
        wilson_interval(self.conclusive_count, self.n_pulses, 1.0).half_width()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    conclusive: u64,
    errors: u64,
    double_clicks: u64,
}

impl Counts {
    fn merge(self, other: Counts) -> Counts {
        Counts {
            conclusive: self.conclusive + other.conclusive,
            errors: self.errors + other.errors,
            double_clicks: self.double_clicks + other.double_clicks,
        }
    }
}

/// Per-pulse probabilities `(conclusive, error)` implied by the click model
/// for a given signal-click probability. Linear in `click`, so averaging
/// over a mixture of intensities gives the same result as the mean click
/// probability.
pub fn expected_probabilities(click: f64, detector: &DetectorConfig, policy: DoubleClickPolicy) -> (f64, f64) {
    let d = detector.p_dc;
    let single_dark = 2.0 * d * (1.0 - d);
    let both_dark = d * d;
    let signal_alone = click * (1.0 - d);
    let mut conclusive = signal_alone + (1.0 - click) * single_dark;
    let mut errors = signal_alone * detector.p_opt + (1.0 - click) * d * (1.0 - d);
    if policy == DoubleClickPolicy::RandomBit {
        let doubles = click * d + (1.0 - click) * both_dark;
        conclusive += doubles;
        errors += doubles / 2.0;
    }
    (conclusive, errors)
}

fn simulate_block(
    n: u64,
    rng: &mut ChaCha8Rng,
    detector: &DetectorConfig,
    policy: DoubleClickPolicy,
    pick: &(impl Fn(&mut ChaCha8Rng) -> f64 + Sync),
) -> Counts {
    let mut counts = Counts::default();
    for _ in 0..n {
        let click = pick(rng);
        // Detector index: false = correct bit, true = wrong bit.
        let mut correct = false;
        let mut wrong = false;
        if rng.gen::<f64>() < click {
            if rng.gen::<f64>() < detector.p_opt {
                wrong = true;
            } else {
                correct = true;
            }
        }
        if detector.p_dc > 0.0 {
            correct |= rng.gen::<f64>() < detector.p_dc;
            wrong |= rng.gen::<f64>() < detector.p_dc;
        }
        match (correct, wrong) {
            (false, false) => {}
            (true, false) => counts.conclusive += 1,
            (false, true) => {
                counts.conclusive += 1;
                counts.errors += 1;
            }
            (true, true) => {
                counts.double_clicks += 1;
                if policy == DoubleClickPolicy::RandomBit {
                    counts.conclusive += 1;
                    if rng.gen::<bool>() {
                        counts.errors += 1;
                    }
                }
            }
        }
    }
    counts
}

pub fn simulate(setup: &SetupConfig, detector: &DetectorConfig, config: &SimConfig) -> Result<SimResult> {
    setup.validate()?;
    detector.validate()?;
    check(
        config.n_pulses >= 1,
        "n_pulses",
        config.n_pulses as f64,
        "must be at least 1",
    )?;
    let eta = detector.eta;
    let mu_prime = setup.mu_prime();

    let (p_success, click_s, click_f) = match config.attack {
        SimAttack::None | SimAttack::BeamSplit => {
            let c = signal_click_probability(eta, mu_prime);
            (1.0, c, c)
        }
        SimAttack::SoftFilter(pt) => (
            pt.p,
            signal_click_probability(eta, pt.beta_s_sq),
            signal_click_probability(eta, pt.beta_f_sq),
        ),
    };
    let mixed = click_s != click_f;
    let pick = move |rng: &mut ChaCha8Rng| {
        if !mixed || rng.gen::<f64>() < p_success {
            click_s
        } else {
            click_f
        }
    };

    let blocks = config.n_pulses.div_ceil(BLOCK_PULSES);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(block);
            let n = BLOCK_PULSES.min(config.n_pulses - block * BLOCK_PULSES);
            simulate_block(n, &mut rng, detector, config.double_click, &pick)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Counts::default(), Counts::merge);

    let qber_hat = if counts.conclusive > 0 {
        counts.errors as f64 / counts.conclusive as f64
    } else {
        0.0
    };
    Ok(SimResult {
        n_pulses: config.n_pulses,
        conclusive_count: counts.conclusive,
        error_count: counts.errors,
        double_clicks: counts.double_clicks,
        qber_hat,
        rate_hat: counts.conclusive as f64 / config.n_pulses as f64,
        qber_ci95: wilson_interval(counts.errors, counts.conclusive, 1.959_963_984_540_054),
        rate_ci95: wilson_interval(counts.conclusive, config.n_pulses, 1.959_963_984_540_054),
    })
}
