//! Flat `key = value` run configuration shared by every subcommand.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use srqkd_core::sweeps::{Bb84MuPolicy, DistanceOptions, GridSpec, MuPolicy, Scale, SrpCriterion};
use srqkd_core::{DecoyRatios, DetectorConfig, DoubleClickPolicy, Protocol, SetupConfig};

/// Environment variable naming a config file to load when `--config` is absent.
pub const CONFIG_ENV: &str = "SRQKD_CONFIG";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimAttackKind {
    None,
    BeamSplit,
    SoftFilter,
}

/// Every key the config file and command line accept, with its help text.
pub const KEYS: &[(&str, &str)] = &[
    ("protocol", "b92-sr, bb84-sr, bb84-standard or bb84-decoy"),
    ("mu", "signal mean photon number"),
    ("t_db", "signal attenuation relative to the reference pulse, dB"),
    ("length_km", "fibre length, km"),
    ("pulse_rate_hz", "pulse repetition rate, Hz"),
    ("fiber_loss_db_per_km", "fibre loss, dB/km"),
    ("eta", "detector efficiency"),
    ("p_dc", "dark count probability per gate"),
    ("p_opt", "optical error probability"),
    ("nep", "monitor noise-equivalent power, W/sqrt(Hz)"),
    ("tau_s", "monitor integration time, s"),
    ("lambda_m", "wavelength, m"),
    ("f_ec", "error-correction inefficiency"),
    ("nu1_ratio", "first decoy intensity as a fraction of mu"),
    ("nu2_ratio", "second decoy intensity as a fraction of mu"),
    ("p_mu", "probability of sending the signal state"),
    (
        "bb84_mu",
        "BB84 intensity in distance scans: optimized, match-sr or a number",
    ),
    ("protocols", "comma-separated protocols for rate-vs-distance"),
    ("mu_lo", "lower end of the mu grid"),
    ("mu_hi", "upper end of the mu grid"),
    ("mu_points", "number of mu grid points"),
    ("mu_scale", "mu grid spacing: log or linear"),
    ("t_lo", "lower end of the t grid, dB"),
    ("t_hi", "upper end of the t grid, dB"),
    ("t_points", "number of t grid points"),
    ("l_lo", "lower end of the distance grid, km"),
    ("l_hi", "upper end of the distance grid, km"),
    ("l_points", "number of distance grid points"),
    ("mu_policy", "intensity in min-srp scans: optimized or a number"),
    (
        "srp_criterion",
        "min-srp criterion: positive or a fraction of the maximum",
    ),
    ("grid_points", "scan points for the attack search"),
    ("n_pulses", "pulses to simulate"),
    ("seed", "random seed"),
    (
        "sim_attack",
        "attack during simulation: none, beam-split or soft-filter",
    ),
    ("double_click", "double-click handling: discard or random-bit"),
    ("povm_tail", "Poisson tail mass dropped by the Fock truncation"),
    ("storage_km", "storage line length, km"),
    ("n_fib", "fibre group index"),
    ("format", "output format: csv or json"),
    ("out", "output file; empty for stdout"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub mu: f64,
    pub t_db: f64,
    pub length_km: f64,
    pub pulse_rate_hz: f64,
    pub fiber_loss_db_per_km: f64,
    pub detector: DetectorConfig,
    pub ratios: DecoyRatios,
    pub bb84_mu: Bb84MuPolicy,
    pub protocols: Vec<Protocol>,
    pub grid: GridSpec,
    pub mu_policy: MuPolicy,
    pub srp_criterion: SrpCriterion,
    pub grid_points: usize,
    pub n_pulses: u64,
    pub seed: u64,
    pub sim_attack: SimAttackKind,
    pub double_click: DoubleClickPolicy,
    pub povm_tail: f64,
    pub storage_km: f64,
    pub n_fib: f64,
    pub format: Format,
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: Protocol::B92Sr,
            mu: 0.3,
            t_db: 65.0,
            length_km: 10.0,
            pulse_rate_hz: 5e6,
            fiber_loss_db_per_km: srqkd_core::physics::DEFAULT_FIBER_LOSS_DB_PER_KM,
            detector: DetectorConfig::default(),
            ratios: DecoyRatios::default(),
            bb84_mu: Bb84MuPolicy::Optimized,
            protocols: Protocol::ALL.to_vec(),
            grid: GridSpec::default(),
            mu_policy: MuPolicy::OptimizedPerT,
            srp_criterion: SrpCriterion::Positive,
            grid_points: 2000,
            n_pulses: 10_000_000,
            seed: 1,
            sim_attack: SimAttackKind::None,
            double_click: DoubleClickPolicy::Discard,
            povm_tail: 1e-16,
            storage_km: 10.0,
            n_fib: 1.47,
            format: Format::Csv,
            out: String::new(),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("invalid value `{value}` for key `{key}`")))
}

fn scale_name(s: Scale) -> &'static str {
    match s {
        Scale::Linear => "linear",
        Scale::Log => "log",
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = || ConfigError(format!("invalid value `{value}` for key `{key}`"));
        match key {
            "protocol" => self.protocol = value.parse().map_err(|_| bad())?,
            "mu" => self.mu = num(key, value)?,
            "t_db" => self.t_db = num(key, value)?,
            "length_km" => self.length_km = num(key, value)?,
            "pulse_rate_hz" => self.pulse_rate_hz = num(key, value)?,
            "fiber_loss_db_per_km" => self.fiber_loss_db_per_km = num(key, value)?,
            "eta" => self.detector.eta = num(key, value)?,
            "p_dc" => self.detector.p_dc = num(key, value)?,
            "p_opt" => self.detector.p_opt = num(key, value)?,
            "nep" => self.detector.nep = num(key, value)?,
            "tau_s" => self.detector.tau_s = num(key, value)?,
            "lambda_m" => self.detector.lambda_m = num(key, value)?,
            "f_ec" => self.detector.f_ec = num(key, value)?,
            "nu1_ratio" => self.ratios.nu1 = num(key, value)?,
            "nu2_ratio" => self.ratios.nu2 = num(key, value)?,
            "p_mu" => self.ratios.p_mu = num(key, value)?,
            "bb84_mu" => {
                self.bb84_mu = match value {
                    "optimized" => Bb84MuPolicy::Optimized,
                    "match-sr" => Bb84MuPolicy::MatchSr,
                    v => Bb84MuPolicy::Fixed(num(key, v)?),
                }
            }
            "protocols" => {
                self.protocols = value
                    .split(',')
                    .map(|p| p.trim().parse::<Protocol>().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?
            }
            "mu_lo" => self.grid.mu.lo = num(key, value)?,
            "mu_hi" => self.grid.mu.hi = num(key, value)?,
            "mu_points" => self.grid.mu.points = num(key, value)?,
            "mu_scale" => {
                self.grid.mu.scale = match value {
                    "log" => Scale::Log,
                    "linear" => Scale::Linear,
                    _ => return Err(bad()),
                }
            }
            "t_lo" => self.grid.t_db.lo = num(key, value)?,
            "t_hi" => self.grid.t_db.hi = num(key, value)?,
            "t_points" => self.grid.t_db.points = num(key, value)?,
            "l_lo" => self.grid.length_km.lo = num(key, value)?,
            "l_hi" => self.grid.length_km.hi = num(key, value)?,
            "l_points" => self.grid.length_km.points = num(key, value)?,
            "mu_policy" => {
                self.mu_policy = match value {
                    "optimized" => MuPolicy::OptimizedPerT,
                    v => MuPolicy::Fixed(num(key, v)?),
                }
            }
            "srp_criterion" => {
                self.srp_criterion = match value {
                    "positive" => SrpCriterion::Positive,
                    v => SrpCriterion::FractionOfMax(num(key, v)?),
                }
            }
            "grid_points" => self.grid_points = num(key, value)?,
            "n_pulses" => self.n_pulses = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "sim_attack" => {
                self.sim_attack = match value {
                    "none" => SimAttackKind::None,
                    "beam-split" => SimAttackKind::BeamSplit,
                    "soft-filter" => SimAttackKind::SoftFilter,
                    _ => return Err(bad()),
                }
            }
            "double_click" => {
                self.double_click = match value {
                    "discard" => DoubleClickPolicy::Discard,
                    "random-bit" => DoubleClickPolicy::RandomBit,
                    _ => return Err(bad()),
                }
            }
            "povm_tail" => self.povm_tail = num(key, value)?,
            "storage_km" => self.storage_km = num(key, value)?,
            "n_fib" => self.n_fib = num(key, value)?,
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad()),
                }
            }
            "out" => self.out = value.to_string(),
            _ => return Err(ConfigError(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        let d = &self.detector;
        let g = &self.grid;
        match key {
            "protocol" => self.protocol.to_string(),
            "mu" => self.mu.to_string(),
            "t_db" => self.t_db.to_string(),
            "length_km" => self.length_km.to_string(),
            "pulse_rate_hz" => self.pulse_rate_hz.to_string(),
            "fiber_loss_db_per_km" => self.fiber_loss_db_per_km.to_string(),
            "eta" => d.eta.to_string(),
            "p_dc" => d.p_dc.to_string(),
            "p_opt" => d.p_opt.to_string(),
            "nep" => d.nep.to_string(),
            "tau_s" => d.tau_s.to_string(),
            "lambda_m" => d.lambda_m.to_string(),
            "f_ec" => d.f_ec.to_string(),
            "nu1_ratio" => self.ratios.nu1.to_string(),
            "nu2_ratio" => self.ratios.nu2.to_string(),
            "p_mu" => self.ratios.p_mu.to_string(),
            "bb84_mu" => match self.bb84_mu {
                Bb84MuPolicy::Optimized => "optimized".into(),
                Bb84MuPolicy::MatchSr => "match-sr".into(),
                Bb84MuPolicy::Fixed(m) => m.to_string(),
            },
            "protocols" => self.protocols.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","),
            "mu_lo" => g.mu.lo.to_string(),
            "mu_hi" => g.mu.hi.to_string(),
            "mu_points" => g.mu.points.to_string(),
            "mu_scale" => scale_name(g.mu.scale).into(),
            "t_lo" => g.t_db.lo.to_string(),
            "t_hi" => g.t_db.hi.to_string(),
            "t_points" => g.t_db.points.to_string(),
            "l_lo" => g.length_km.lo.to_string(),
            "l_hi" => g.length_km.hi.to_string(),
            "l_points" => g.length_km.points.to_string(),
            "mu_policy" => match self.mu_policy {
                MuPolicy::OptimizedPerT => "optimized".into(),
                MuPolicy::Fixed(m) => m.to_string(),
            },
            "srp_criterion" => match self.srp_criterion {
                SrpCriterion::Positive => "positive".into(),
                SrpCriterion::FractionOfMax(x) => x.to_string(),
            },
            "grid_points" => self.grid_points.to_string(),
            "n_pulses" => self.n_pulses.to_string(),
            "seed" => self.seed.to_string(),
            "sim_attack" => match self.sim_attack {
                SimAttackKind::None => "none".into(),
                SimAttackKind::BeamSplit => "beam-split".into(),
                SimAttackKind::SoftFilter => "soft-filter".into(),
            },
            "double_click" => match self.double_click {
                DoubleClickPolicy::Discard => "discard".into(),
                DoubleClickPolicy::RandomBit => "random-bit".into(),
            },
            "povm_tail" => self.povm_tail.to_string(),
            "storage_km" => self.storage_km.to_string(),
            "n_fib" => self.n_fib.to_string(),
            "format" => match self.format {
                Format::Csv => "csv".into(),
                Format::Json => "json".into(),
            },
            "out" => self.out.clone(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Applies every `key = value` line of `text`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (key, help) in KEYS {
            s.push_str(&format!("# {help}\n{key} = {}\n", self.get(key)));
        }
        s
    }

    pub fn setup(&self) -> srqkd_core::Result<SetupConfig> {
        let mut setup = SetupConfig::new(self.protocol, self.mu, self.t_db, self.length_km, self.pulse_rate_hz)?;
        setup.fiber_loss_db_per_km = self.fiber_loss_db_per_km;
        setup.validate()?;
        Ok(setup)
    }

    pub fn distance_options(&self) -> DistanceOptions {
        DistanceOptions {
            t_db: self.t_db,
            pulse_rate_hz: self.pulse_rate_hz,
            fiber_loss_db_per_km: self.fiber_loss_db_per_km,
            bb84_mu: self.bb84_mu,
            ratios: self.ratios,
        }
    }

    /// Re-checks every invariant after merging defaults, file and flags.
    pub fn validate(&self) -> srqkd_core::Result<()> {
        self.setup()?;
        self.detector.validate()?;
        self.ratios.config_for(self.mu)?;
        self.grid.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let cfg = RunConfig::default();
        for (key, _) in KEYS {
            let mut other = RunConfig::default();
            other.set(key, &cfg.get(key)).unwrap();
            assert_eq!(other, cfg, "{key}");
        }
    }

    #[test]
    fn dump_reparses_to_same_config() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("mu = 0.123456789012345\nbb84_mu = 0.2\nprotocols = b92-sr, bb84-decoy\nsrp_criterion = 0.99\nout = a.csv # trailing\n")
            .unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.dump()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::default().apply_text("bogus_key = 1").unwrap_err();
        assert!(err.0.contains("bogus_key"));
        assert!(RunConfig::default().apply_text("mu 0.3").is_err());
        assert!(RunConfig::default().apply_text("mu = abc").is_err());
    }
}
