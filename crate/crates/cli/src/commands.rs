use srqkd_core::attack::{attack_point, maximize_eve_information_with};
use srqkd_core::discrimination::{build_povm, fock, overlap, Outcome};
use srqkd_core::physics::{monitor_precision_delta, qber, signal_click_probability, GREY_REGION_DELTA};
use srqkd_core::rates::{secret_rate, sr_secret_rate_with};
use srqkd_core::simulation::{expected_probabilities, simulate, SimAttack, SimConfig};
use srqkd_core::sweeps::{
    min_srp_photons, optimize_mu_with, rate_vs_distance, rate_vs_t, sweep_mu_t, train_capacity, SrpCriterion, SweepRow,
};
use srqkd_core::{Error, SearchOptions};

use crate::config::{RunConfig, SimAttackKind};
use crate::output::Table;

pub const COMMANDS: &[(&str, &str)] = &[
    ("rate", "secret key rate breakdown for one setup"),
    ("attack", "optimal soft-filtering attack with its scan over b"),
    ("sweep-mu-t", "rates over the (mu, t) grid"),
    ("optimize-mu", "signal intensity that maximizes the rate"),
    ("rate-vs-t", "rate against reference attenuation t"),
    ("rate-vs-distance", "protocol comparison over the distance grid"),
    (
        "min-srp",
        "smallest reference pulse photon number that meets the criterion",
    ),
    ("simulate", "Monte Carlo run of the receiver"),
    ("povm-check", "consistency checks of the discriminating measurement"),
    ("train-capacity", "pulses that fit in the storage line"),
];

/// Text sent to stderr alongside the table.
pub struct Report {
    pub table: Table,
    pub notes: Vec<String>,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Report {
            table,
            notes: Vec::new(),
        }
    }
}

pub const SWEEP_HEADER: &[&str] = &[
    "mu",
    "t_db",
    "length_km",
    "delta",
    "qber",
    "i_e",
    "r_sec_per_pulse",
    "r_sec_hz",
    "flags",
];

fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(SWEEP_HEADER);
    for r in rows {
        t.push(vec![
            r.mu.into(),
            r.t_db.into(),
            r.length_km.into(),
            r.delta.into(),
            r.qber.into(),
            r.i_e.into(),
            r.r_sec_per_pulse.into(),
            r.r_sec_hz.into(),
            r.flags.to_string().into(),
        ]);
    }
    t
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<Report, Error> {
    cfg.validate()?;
    match command {
        "rate" => rate(cfg),
        "attack" => attack(cfg),
        "sweep-mu-t" => {
            Ok(sweep_table(&sweep_mu_t(&cfg.setup()?, &cfg.grid.mu, &cfg.grid.t_db, &cfg.detector)?).into())
        }
        "optimize-mu" => optimize(cfg),
        "rate-vs-t" => {
            let curve = rate_vs_t(&cfg.setup()?, &cfg.grid.t_db, &cfg.detector)?;
            let note = match curve.t_sat {
                Some(t) => format!("t_sat_db = {t}"),
                None => "t_sat_db = none".to_string(),
            };
            Ok(Report {
                table: sweep_table(&curve.rows),
                notes: vec![note],
            })
        }
        "rate-vs-distance" => distance(cfg),
        "min-srp" => min_srp(cfg),
        "simulate" => sim(cfg),
        "povm-check" => povm(cfg),
        "train-capacity" => {
            let n = train_capacity(cfg.storage_km, cfg.pulse_rate_hz, cfg.n_fib)?;
            let mut t = Table::new(&["storage_km", "pulse_rate_hz", "n_fib", "pulses"]);
            t.push(vec![
                cfg.storage_km.into(),
                cfg.pulse_rate_hz.into(),
                cfg.n_fib.into(),
                n.into(),
            ]);
            Ok(t.into())
        }
        other => unreachable!("unregistered command {other}"),
    }
}

fn rate(cfg: &RunConfig) -> Result<Report, Error> {
    let setup = cfg.setup()?;
    let delta = monitor_precision_delta(&setup, &cfg.detector).value;
    let (r, fallback) = if setup.protocol.is_strong_reference() {
        let opts = SearchOptions {
            grid_points: cfg.grid_points,
            ..Default::default()
        };
        let r = sr_secret_rate_with(&setup, &cfg.detector, &opts)?;
        (r.rate, r.attack.beam_splitting_fallback)
    } else {
        (secret_rate(&setup, &cfg.detector, &cfg.ratios)?, false)
    };
    let flags = srqkd_core::sweeps::RowFlags {
        grey_region: delta > GREY_REGION_DELTA,
        clamped: r.clamped(),
        attack_infeasible: fallback,
    };
    let mut t = Table::new(&[
        "protocol",
        "mu",
        "t_db",
        "length_km",
        "delta",
        "qber",
        "i_ab",
        "i_e",
        "r_raw_hz",
        "r_sec_per_pulse",
        "r_sec_hz",
        "unclamped_per_pulse",
        "flags",
    ]);
    t.push(vec![
        setup.protocol.as_str().into(),
        setup.mu.into(),
        setup.t_db.into(),
        setup.length_km.into(),
        delta.into(),
        r.qber.into(),
        r.i_ab.into(),
        r.i_e.into(),
        r.r_raw.into(),
        r.per_pulse.into(),
        r.r_sec.into(),
        r.unclamped_per_pulse.into(),
        flags.to_string().into(),
    ]);
    Ok(t.into())
}

fn attack(cfg: &RunConfig) -> Result<Report, Error> {
    let setup = cfg.setup()?;
    let delta = monitor_precision_delta(&setup, &cfg.detector).value;
    let opts = SearchOptions {
        grid_points: cfg.grid_points,
        keep_trace: true,
        ..Default::default()
    };
    let sol = maximize_eve_information_with(&setup, &cfg.detector, delta, &opts)?;
    let mut t = Table::new(&["kind", "b", "p", "a", "beta_s_sq", "beta_f_sq", "i_e"]);
    let best = sol.best;
    t.push(vec![
        if sol.beam_splitting_fallback {
            "fallback"
        } else {
            "best"
        }
        .into(),
        best.b.into(),
        best.p.into(),
        best.a.into(),
        best.beta_s_sq.into(),
        best.beta_f_sq.into(),
        best.i_e.into(),
    ]);
    for &(b, _) in &sol.scan_trace {
        let pt = attack_point(b, &setup, &cfg.detector, delta)?;
        t.push(vec![
            "scan".into(),
            pt.b.into(),
            pt.p.into(),
            pt.a.into(),
            pt.beta_s_sq.into(),
            pt.beta_f_sq.into(),
            pt.i_e.into(),
        ]);
    }
    let notes = vec![format!(
        "delta = {}, b_min = {}, b_max = {}, monitoring_unacceptable = {}",
        sol.delta, sol.b_min, sol.b_max, sol.monitoring_unacceptable
    )];
    Ok(Report { table: t, notes })
}

fn optimize(cfg: &RunConfig) -> Result<Report, Error> {
    let setup = cfg.setup()?;
    let opt = optimize_mu_with(&setup, &cfg.detector, &cfg.ratios)?;
    let mut t = Table::new(&["protocol", "length_km", "t_db", "mu_opt", "r_sec_per_pulse", "r_sec_hz"]);
    t.push(vec![
        setup.protocol.as_str().into(),
        setup.length_km.into(),
        setup.t_db.into(),
        opt.mu_opt.into(),
        opt.r_sec_per_pulse.into(),
        opt.r_sec_hz.into(),
    ]);
    let mut report = Report::from(t);
    if opt.mu_opt.is_none() {
        report
            .notes
            .push("rate is zero for every intensity; mu_opt undefined".into());
    }
    Ok(report)
}

fn distance(cfg: &RunConfig) -> Result<Report, Error> {
    let ls = cfg.grid.length_km.values();
    let ds = rate_vs_distance(&cfg.protocols, &cfg.detector, &ls, &cfg.distance_options())?;
    let mut t = Table::new(&[
        "protocol",
        "length_km",
        "mu",
        "qber",
        "i_e",
        "r_sec_per_pulse",
        "r_sec_hz",
    ]);
    for r in &ds.rows {
        t.push(vec![
            r.protocol.as_str().into(),
            r.length_km.into(),
            r.mu.into(),
            r.qber.into(),
            r.i_e.into(),
            r.r_sec_per_pulse.into(),
            r.r_sec_hz.into(),
        ]);
    }
    let note = match ds.crossover {
        Some(c) => format!("crossover_km = {}", c.length_km),
        None => "crossover_km = none".to_string(),
    };
    Ok(Report {
        table: t,
        notes: vec![note],
    })
}

fn min_srp(cfg: &RunConfig) -> Result<Report, Error> {
    let setup = cfg.setup()?;
    let th = min_srp_photons(&setup, &cfg.detector, &cfg.grid.t_db, cfg.mu_policy, cfg.srp_criterion)?;
    let criterion = match cfg.srp_criterion {
        SrpCriterion::Positive => "positive".to_string(),
        SrpCriterion::FractionOfMax(x) => x.to_string(),
    };
    let mut t = Table::new(&[
        "length_km",
        "criterion",
        "nu",
        "t_db",
        "mu",
        "r_sec_per_pulse",
        "max_r_sec_per_pulse",
    ]);
    t.push(vec![
        setup.length_km.into(),
        criterion.into(),
        th.nu.into(),
        th.t_db.into(),
        th.mu.into(),
        th.r_sec_per_pulse.into(),
        th.max_r_sec_per_pulse.into(),
    ]);
    Ok(t.into())
}

fn sim(cfg: &RunConfig) -> Result<Report, Error> {
    let setup = cfg.setup()?;
    let det = &cfg.detector;
    let attack = match cfg.sim_attack {
        SimAttackKind::None => SimAttack::None,
        SimAttackKind::BeamSplit => SimAttack::BeamSplit,
        SimAttackKind::SoftFilter => {
            let delta = monitor_precision_delta(&setup, det).value;
            let opts = SearchOptions {
                grid_points: cfg.grid_points,
                ..Default::default()
            };
            SimAttack::SoftFilter(maximize_eve_information_with(&setup, det, delta, &opts)?.best)
        }
    };
    let sc = SimConfig {
        n_pulses: cfg.n_pulses,
        seed: cfg.seed,
        attack,
        double_click: cfg.double_click,
    };
    let r = simulate(&setup, det, &sc)?;
    let click = match attack {
        SimAttack::SoftFilter(pt) => {
            pt.p * signal_click_probability(det.eta, pt.beta_s_sq)
                + (1.0 - pt.p) * signal_click_probability(det.eta, pt.beta_f_sq)
        }
        _ => signal_click_probability(det.eta, setup.mu_prime()),
    };
    let (rate_model, _) = expected_probabilities(click, det, cfg.double_click);
    let mut t = Table::new(&[
        "n_pulses",
        "seed",
        "attack",
        "conclusive_count",
        "error_count",
        "double_clicks",
        "qber_hat",
        "qber_sigma",
        "qber_ci95_lo",
        "qber_ci95_hi",
        "qber_model",
        "rate_hat",
        "rate_sigma",
        "rate_ci95_lo",
        "rate_ci95_hi",
        "rate_model",
    ]);
    t.push(vec![
        r.n_pulses.into(),
        cfg.seed.into(),
        cfg_attack_name(cfg.sim_attack).into(),
        r.conclusive_count.into(),
        r.error_count.into(),
        r.double_clicks.into(),
        r.qber_hat.into(),
        r.qber_sigma().into(),
        r.qber_ci95.lower.into(),
        r.qber_ci95.upper.into(),
        qber(&setup, det).value.into(),
        r.rate_hat.into(),
        r.rate_sigma().into(),
        r.rate_ci95.lower.into(),
        r.rate_ci95.upper.into(),
        rate_model.into(),
    ]);
    Ok(t.into())
}

fn cfg_attack_name(k: SimAttackKind) -> &'static str {
    match k {
        SimAttackKind::None => "none",
        SimAttackKind::BeamSplit => "beam-split",
        SimAttackKind::SoftFilter => "soft-filter",
    }
}

fn povm(cfg: &RunConfig) -> Result<Report, Error> {
    let mu = cfg.mu;
    let p = build_povm(overlap(mu)?)?;
    let f = fock::check_povm(mu, cfg.povm_tail)?;
    let mut t = Table::new(&[
        "mu",
        "overlap",
        "p_inconclusive",
        "expected_p_inconclusive",
        "completeness_residual",
        "min_eigenvalue",
        "cross_click",
        "hermiticity_residual",
        "fock_dim",
        "fock_p_inconclusive",
        "fock_cross_click",
        "fock_completeness_residual",
    ]);
    t.push(vec![
        mu.into(),
        p.cos_gamma.into(),
        p.probability(Outcome::Inconclusive, 0).into(),
        (-2.0 * mu).exp().into(),
        p.completeness_residual().into(),
        p.min_eigenvalue().into(),
        p.cross_click().into(),
        p.hermiticity_residual().into(),
        (f.dim as u64).into(),
        f.p_inconclusive[0].max(f.p_inconclusive[1]).into(),
        f.cross_click[0].max(f.cross_click[1]).into(),
        f.completeness_residual.into(),
    ]);
    Ok(t.into())
}
