//! Parameter sweeps and the scalar results derived from them.

use std::fmt;

use rayon::prelude::*;

use crate::attack::SearchOptions;
use crate::error::{check, Error, Result};
use crate::optimize::{grid_then_golden, linspace, logspace};
use crate::physics::{
    monitor_precision_delta, DetectorConfig, Protocol, SetupConfig, GREY_REGION_DELTA, SPEED_OF_LIGHT,
};
use crate::rates::{decoy_bb84_rate, secret_rate, sr_secret_rate_with, standard_bb84_rate, DecoyRatios};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: Scale,
}

impl Range {
    pub fn linear(lo: f64, hi: f64, points: usize) -> Self {
        Range {
            lo,
            hi,
            points,
            scale: Scale::Linear,
        }
    }

    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        Range {
            lo,
            hi,
            points,
            scale: Scale::Log,
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        check(
            self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi,
            name,
            self.lo,
            "range needs lo < hi",
        )?;
        check(
            self.points >= 2,
            name,
            self.points as f64,
            "range needs at least 2 points",
        )?;
        if self.scale == Scale::Log {
            check(self.lo > 0.0, name, self.lo, "log range needs lo > 0")?;
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => linspace(self.lo, self.hi, self.points),
            Scale::Log => logspace(self.lo, self.hi, self.points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub mu: Range,
    pub t_db: Range,
    pub length_km: Range,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            mu: Range::log(0.01, 1.0, 81),
            t_db: Range::linear(40.0, 90.0, 101),
            length_km: Range::linear(0.0, 120.0, 61),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.mu.validate("mu_range")?;
        self.t_db.validate("t_range_db")?;
        self.length_km.validate("l_range_km")?;
        check(
            self.length_km.lo >= 0.0,
            "l_range_km",
            self.length_km.lo,
            "distances must be non-negative",
        )?;
        check(
            self.t_db.lo >= 0.0,
            "t_range_db",
            self.t_db.lo,
            "attenuation must be non-negative",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowFlags {
    pub grey_region: bool,
    pub clamped: bool,
    pub attack_infeasible: bool,
}

impl fmt::Display for RowFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = [
            (self.grey_region, "grey-region"),
            (self.clamped, "clamped"),
            (self.attack_infeasible, "attack-infeasible"),
        ];
        let set: Vec<&str> = names.iter().filter(|(on, _)| *on).map(|(_, n)| *n).collect();
        f.write_str(&set.join("|"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub t_db: f64,
    pub length_km: f64,
    pub delta: f64,
    pub qber: f64,
    pub i_e: f64,
    pub r_sec_per_pulse: f64,
    pub r_sec_hz: f64,
    pub flags: RowFlags,
}

/// Evaluates one setup. Strong-reference protocols get their own attack
/// optimization; the BB84 protocols use `ratios` for decoy intensities.
pub fn evaluate_row(setup: &SetupConfig, detector: &DetectorConfig, ratios: &DecoyRatios) -> Result<SweepRow> {
    let delta = monitor_precision_delta(setup, detector).value;
    let (rate, attack_infeasible) = if setup.protocol.is_strong_reference() {
        let r = sr_secret_rate_with(setup, detector, &SearchOptions::default())?;
        (r.rate, r.attack.beam_splitting_fallback)
    } else {
        (secret_rate(setup, detector, ratios)?, false)
    };
    Ok(SweepRow {
        mu: setup.mu,
        t_db: setup.t_db,
        length_km: setup.length_km,
        delta,
        qber: rate.qber,
        i_e: rate.i_e,
        r_sec_per_pulse: rate.per_pulse,
        r_sec_hz: rate.r_sec,
        flags: RowFlags {
            grey_region: delta > GREY_REGION_DELTA,
            clamped: rate.clamped(),
            attack_infeasible,
        },
    })
}

/// Rates over a (mu, t) grid at the distance of `base`. Rows come out
/// mu-major, in grid order.
pub fn sweep_mu_t(base: &SetupConfig, mu: &Range, t_db: &Range, detector: &DetectorConfig) -> Result<Vec<SweepRow>> {
    base.validate()?;
    detector.validate()?;
    mu.validate("mu_range")?;
    t_db.validate("t_range_db")?;
    check(mu.lo > 0.0, "mu_range", mu.lo, "intensities must be positive")?;
    check(
        t_db.lo >= 0.0,
        "t_range_db",
        t_db.lo,
        "attenuation must be non-negative",
    )?;
    let mus = mu.values();
    let ts = t_db.values();
    let points: Vec<(f64, f64)> = mus.iter().flat_map(|&m| ts.iter().map(move |&t| (m, t))).collect();
    let ratios = DecoyRatios::default();
    points
        .par_iter()
        .map(|&(m, t)| evaluate_row(&base.with_mu(m).with_t_db(t), detector, &ratios))
        .collect()
}

/// Default search range for intensity optimization.
pub const MU_SEARCH: (f64, f64, usize) = (1e-3, 2.0, 64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuOptimum {
    /// `None` when the rate is zero everywhere in the search range.
    pub mu_opt: Option<f64>,
    pub r_sec_per_pulse: f64,
    pub r_sec_hz: f64,
}

/// Per-pulse rate, or `None` when the point cannot be used: the rate
/// calculation failed, or the protocol relies on reference monitoring and
/// the monitoring precision is in the grey region.
pub fn admissible_rate(setup: &SetupConfig, detector: &DetectorConfig, ratios: &DecoyRatios) -> Option<f64> {
    if setup.protocol.is_strong_reference() && monitor_precision_delta(setup, detector).unacceptable {
        return None;
    }
    secret_rate(setup, detector, ratios).ok().map(|r| r.per_pulse)
}

/// Maximizes the per-pulse secret rate of `base.protocol` over mu, holding
/// everything else in `base` fixed. Grey-region intensities are skipped.
pub fn optimize_mu_with(base: &SetupConfig, detector: &DetectorConfig, ratios: &DecoyRatios) -> Result<MuOptimum> {
    base.validate()?;
    detector.validate()?;
    let log_grid: Vec<f64> = logspace(MU_SEARCH.0, MU_SEARCH.1, MU_SEARCH.2)
        .iter()
        .map(|m| m.ln())
        .collect();
    let values: Vec<Option<f64>> = log_grid
        .par_iter()
        .map(|&y| admissible_rate(&base.with_mu(y.exp()), detector, ratios))
        .collect();
    if values.iter().all(|v| v.is_none_or(|x| x <= 0.0)) {
        return Ok(MuOptimum {
            mu_opt: None,
            r_sec_per_pulse: 0.0,
            r_sec_hz: 0.0,
        });
    }
    let objective = |y: f64| match log_grid.iter().position(|&g| g == y) {
        Some(i) => values[i],
        None => admissible_rate(&base.with_mu(y.exp()), detector, ratios),
    };
    let best = grid_then_golden(objective, &log_grid, 1e-7)
        .ok_or_else(|| Error::Numerical("intensity search found no feasible point".into()))?;
    Ok(MuOptimum {
        mu_opt: Some(best.x.exp()),
        r_sec_per_pulse: best.value,
        r_sec_hz: best.value * base.pulse_rate_hz,
    })
}

pub fn optimize_mu(base: &SetupConfig, detector: &DetectorConfig) -> Result<MuOptimum> {
    optimize_mu_with(base, detector, &DecoyRatios::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateVsT {
    pub rows: Vec<SweepRow>,
    /// Smallest t on the grid, outside the grey region, with a rate of at
    /// least 99% of the rate at the largest t. `None` if the rate at the
    /// largest t is zero.
    pub t_sat: Option<f64>,
}

pub fn saturation_onset(ts: &[f64], rates: &[f64], fraction: f64) -> Option<f64> {
    let last = *rates.last()?;
    if last <= 0.0 {
        return None;
    }
    ts.iter()
        .zip(rates)
        .find(|(_, &r)| r >= fraction * last)
        .map(|(&t, _)| t)
}

/// Rate as a function of t at fixed mu and distance.
pub fn rate_vs_t(base: &SetupConfig, t_db: &Range, detector: &DetectorConfig) -> Result<RateVsT> {
    base.validate()?;
    t_db.validate("t_range_db")?;
    check(
        t_db.lo >= 0.0,
        "t_range_db",
        t_db.lo,
        "attenuation must be non-negative",
    )?;
    let ts = t_db.values();
    let ratios = DecoyRatios::default();
    let rows: Vec<SweepRow> = ts
        .par_iter()
        .map(|&t| evaluate_row(&base.with_t_db(t), detector, &ratios))
        .collect::<Result<_>>()?;
    let (ts, rates): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| !r.flags.grey_region)
        .map(|r| (r.t_db, r.r_sec_per_pulse))
        .unzip();
    Ok(RateVsT {
        t_sat: saturation_onset(&ts, &rates, 0.99),
        rows,
    })
}

/// How the signal intensity of the BB84 baselines is chosen at each distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bb84MuPolicy {
    /// Maximize each BB84 rate over mu separately.
    Optimized,
    Fixed(f64),
    /// Use the optimal B92-SR intensity at the same distance.
    MatchSr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceOptions {
    pub t_db: f64,
    pub pulse_rate_hz: f64,
    pub fiber_loss_db_per_km: f64,
    pub bb84_mu: Bb84MuPolicy,
    pub ratios: DecoyRatios,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            t_db: 65.0,
            pulse_rate_hz: 5e6,
            fiber_loss_db_per_km: crate::physics::DEFAULT_FIBER_LOSS_DB_PER_KM,
            bb84_mu: Bb84MuPolicy::Optimized,
            ratios: DecoyRatios::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub protocol: Protocol,
    pub length_km: f64,
    /// Signal intensity used; `None` if the rate is zero for every mu.
    pub mu: Option<f64>,
    pub qber: f64,
    pub i_e: f64,
    pub r_sec_per_pulse: f64,
    pub r_sec_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    pub length_km: f64,
    /// `ln(a / b)` at the first grid point, showing which curve starts ahead.
    pub initial_log_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceDataset {
    pub rows: Vec<DistanceRow>,
    /// Where the B92-SR and decoy-BB84 curves meet, when both are present.
    pub crossover: Option<Crossover>,
}

impl DistanceDataset {
    pub fn curve(&self, protocol: Protocol) -> Vec<&DistanceRow> {
        self.rows.iter().filter(|r| r.protocol == protocol).collect()
    }

    pub fn rate(&self, protocol: Protocol, length_km: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.protocol == protocol && r.length_km == length_km)
            .map(|r| r.r_sec_per_pulse)
    }
}

/// First point where curve `a` and curve `b` meet. Between grid points the
/// log-rate gap is interpolated linearly; once either rate hits zero the
/// plain difference is used instead.
pub fn crossover(ls: &[f64], a: &[f64], b: &[f64]) -> Option<Crossover> {
    let n = ls.len().min(a.len()).min(b.len());
    if n == 0 {
        return None;
    }
    let log_gap = |i: usize| (a[i] / b[i]).ln();
    let sign = |i: usize| {
        let d = a[i] - b[i];
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let initial_log_gap = log_gap(0);
    let start = sign(0);
    if start == 0.0 {
        return Some(Crossover {
            length_km: ls[0],
            initial_log_gap,
        });
    }
    for i in 1..n {
        let s = sign(i);
        if s == start {
            continue;
        }
        if a[i] == 0.0 && b[i] == 0.0 {
            // Both curves die in the same cell; no genuine crossing.
            return None;
        }
        let both_positive = a[i - 1] > 0.0 && b[i - 1] > 0.0 && a[i] > 0.0 && b[i] > 0.0;
        let (g0, g1) = if both_positive {
            (log_gap(i - 1), log_gap(i))
        } else {
            (a[i - 1] - b[i - 1], a[i] - b[i])
        };
        let frac = if g1 == g0 { 0.0 } else { g0 / (g0 - g1) };
        let length_km = ls[i - 1] + frac.clamp(0.0, 1.0) * (ls[i] - ls[i - 1]);
        return Some(Crossover {
            length_km,
            initial_log_gap,
        });
    }
    None
}

fn distance_row(
    protocol: Protocol,
    length_km: f64,
    sr_mu: Option<f64>,
    detector: &DetectorConfig,
    options: &DistanceOptions,
) -> Result<DistanceRow> {
    let mut base = SetupConfig::new(protocol, 0.1, options.t_db, length_km, options.pulse_rate_hz)?;
    base.fiber_loss_db_per_km = options.fiber_loss_db_per_km;
    base.validate()?;
    let mu = if protocol.is_strong_reference() {
        if protocol == Protocol::B92Sr {
            sr_mu
        } else {
            optimize_mu_with(&base, detector, &options.ratios)?.mu_opt
        }
    } else {
        match options.bb84_mu {
            Bb84MuPolicy::Optimized => optimize_mu_with(&base, detector, &options.ratios)?.mu_opt,
            Bb84MuPolicy::Fixed(m) => Some(m),
            Bb84MuPolicy::MatchSr => sr_mu,
        }
    };
    let Some(mu) = mu else {
        return Ok(DistanceRow {
            protocol,
            length_km,
            mu: None,
            qber: f64::NAN,
            i_e: f64::NAN,
            r_sec_per_pulse: 0.0,
            r_sec_hz: 0.0,
        });
    };
    let setup = base.with_mu(mu);
    let rate = match protocol {
        Protocol::Bb84Standard => standard_bb84_rate(&setup, detector)?,
        Protocol::Bb84Decoy => decoy_bb84_rate(&setup, &options.ratios.config_for(mu)?, detector)?,
        _ => secret_rate(&setup, detector, &options.ratios)?,
    };
    Ok(DistanceRow {
        protocol,
        length_km,
        mu: Some(mu),
        qber: rate.qber,
        i_e: rate.i_e,
        r_sec_per_pulse: rate.per_pulse,
        r_sec_hz: rate.r_sec,
    })
}

/// Per-distance rates for each protocol in `protocols`. Strong-reference
/// protocols always use their optimal mu; BB84 baselines follow
/// `options.bb84_mu`. Rows are grouped by distance, then by protocol order.
pub fn rate_vs_distance(
    protocols: &[Protocol],
    detector: &DetectorConfig,
    lengths_km: &[f64],
    options: &DistanceOptions,
) -> Result<DistanceDataset> {
    detector.validate()?;
    check(
        !protocols.is_empty(),
        "protocols",
        0.0,
        "at least one protocol is required",
    )?;
    if let Bb84MuPolicy::Fixed(m) = options.bb84_mu {
        check(m > 0.0 && m.is_finite(), "bb84_mu", m, "must be positive")?;
    }
    let rows: Vec<Vec<DistanceRow>> = lengths_km
        .par_iter()
        .map(|&l| {
            let needs_sr_mu = protocols.contains(&Protocol::B92Sr)
                || (options.bb84_mu == Bb84MuPolicy::MatchSr && protocols.iter().any(|p| !p.is_strong_reference()));
            let sr_mu = if needs_sr_mu {
                let mut base = SetupConfig::new(Protocol::B92Sr, 0.1, options.t_db, l, options.pulse_rate_hz)?;
                base.fiber_loss_db_per_km = options.fiber_loss_db_per_km;
                optimize_mu_with(&base, detector, &options.ratios)?.mu_opt
            } else {
                None
            };
            protocols
                .iter()
                .map(|&p| distance_row(p, l, sr_mu, detector, options))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<DistanceRow> = rows.into_iter().flatten().collect();

    let crossover = if protocols.contains(&Protocol::B92Sr) && protocols.contains(&Protocol::Bb84Decoy) {
        let pick = |p: Protocol| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.protocol == p)
                .map(|r| r.r_sec_per_pulse)
                .collect()
        };
        crossover(lengths_km, &pick(Protocol::B92Sr), &pick(Protocol::Bb84Decoy))
    } else {
        None
    };
    Ok(DistanceDataset { rows, crossover })
}

/// Intensity choice for the reference-brightness scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    OptimizedPerT,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SrpCriterion {
    /// Any positive secret rate.
    Positive,
    /// At least this fraction of the best rate found on the scan.
    FractionOfMax(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpThreshold {
    /// Reference pulse photon number `mu * 10^(t/10)` at the threshold.
    pub nu: f64,
    pub t_db: f64,
    pub mu: f64,
    pub r_sec_per_pulse: f64,
    pub max_r_sec_per_pulse: f64,
}

/// Smallest reference-pulse photon number along a t scan that meets
/// `criterion`. Grey-region points never qualify.
pub fn min_srp_photons(
    base: &SetupConfig,
    detector: &DetectorConfig,
    t_db: &Range,
    mu_policy: MuPolicy,
    criterion: SrpCriterion,
) -> Result<SrpThreshold> {
    base.validate()?;
    detector.validate()?;
    t_db.validate("t_range_db")?;
    check(
        t_db.lo >= 0.0,
        "t_range_db",
        t_db.lo,
        "attenuation must be non-negative",
    )?;
    if let SrpCriterion::FractionOfMax(x) = criterion {
        check(x > 0.0 && x <= 1.0, "fraction", x, "must lie in (0, 1]")?;
    }
    let ratios = DecoyRatios::default();
    let points: Vec<(f64, f64, f64)> = t_db
        .values()
        .par_iter()
        .map(|&t| {
            let setup = base.with_t_db(t);
            match mu_policy {
                MuPolicy::OptimizedPerT => {
                    let opt = optimize_mu_with(&setup, detector, &ratios)?;
                    Ok((t, opt.mu_opt.unwrap_or(f64::NAN), opt.r_sec_per_pulse))
                }
                MuPolicy::Fixed(m) => {
                    let setup = setup.with_mu(m);
                    setup.validate()?;
                    Ok((t, m, admissible_rate(&setup, detector, &ratios).unwrap_or(0.0)))
                }
            }
        })
        .collect::<Result<_>>()?;
    let max = points.iter().map(|p| p.2).fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::NoPositiveRate(format!(
            "no positive rate for t in [{}, {}] dB at {} km",
            t_db.lo, t_db.hi, base.length_km
        )));
    }
    let threshold = match criterion {
        SrpCriterion::Positive => 0.0,
        SrpCriterion::FractionOfMax(x) => x * max,
    };
    points
        .iter()
        .filter(|p| p.2 > 0.0 && p.2 >= threshold)
        .map(|&(t, mu, r)| SrpThreshold {
            nu: mu * 10f64.powf(t / 10.0),
            t_db: t,
            mu,
            r_sec_per_pulse: r,
            max_r_sec_per_pulse: max,
        })
        .min_by(|a, b| a.nu.total_cmp(&b.nu))
        .ok_or_else(|| Error::NoPositiveRate("no scan point met the criterion".into()))
}

/// Number of pulses that fit in a fibre storage line of `storage_km` at
/// repetition rate `pulse_rate_hz` and group index `n_fib`.
pub fn train_capacity(storage_km: f64, pulse_rate_hz: f64, n_fib: f64) -> Result<u64> {
    check(
        storage_km >= 0.0 && storage_km.is_finite(),
        "storage_km",
        storage_km,
        "must be non-negative",
    )?;
    check(
        pulse_rate_hz > 0.0 && pulse_rate_hz.is_finite(),
        "pulse_rate_hz",
        pulse_rate_hz,
        "must be positive",
    )?;
    check(n_fib > 0.0 && n_fib.is_finite(), "n_fib", n_fib, "must be positive")?;
    Ok((storage_km * 1e3 * n_fib * pulse_rate_hz / SPEED_OF_LIGHT).floor() as u64)
}
