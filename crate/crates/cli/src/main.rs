mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{RunConfig, CONFIG_ENV, KEYS};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn cli() -> Command {
    let mut cmd = Command::new("srqkd")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Key rates and attacks for QKD with a strong reference pulse")
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .help(format!(
                    "config file of `key = value` lines (default from ${CONFIG_ENV})"
                )),
        )
        .arg(
            Arg::new("dump-config")
                .long("dump-config")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("print the merged configuration and exit"),
        );
    for (key, help) in KEYS {
        let mut arg = Arg::new(*key)
            .long(flag_name(key))
            .global(true)
            .value_name("VALUE")
            .allow_negative_numbers(true)
            .help(*help);
        if *key == "pulse_rate_hz" {
            arg = arg.visible_alias("rate-hz");
        }
        cmd = cmd.arg(arg);
    }
    for (name, about) in commands::COMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn merged_config(m: &ArgMatches) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    let path = m.get_one::<String>("config").map(PathBuf::from).or_else(|| {
        std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });
    if let Some(path) = path {
        cfg.apply_file(&path).map_err(|e| e.to_string())?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v).map_err(|e| format!("--{}: {e}", flag_name(key)))?;
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION),
            };
        }
    };
    let (command, sub) = match matches.subcommand() {
        Some((name, sub)) => (Some(name), sub),
        None => (None, &matches),
    };
    let cfg = match merged_config(sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if sub.get_flag("dump-config") {
        print!("{}", cfg.dump());
        return ExitCode::SUCCESS;
    }
    let Some(command) = command else {
        eprintln!("{}", cli().render_usage());
        eprintln!("error: a subcommand is required");
        return ExitCode::from(EXIT_VALIDATION);
    };
    match commands::run(command, &cfg) {
        Ok(report) => {
            for note in &report.notes {
                eprintln!("{note}");
            }
            let text = output::render(&report.table, cfg.format);
            if let Err(e) = output::emit(&text, &cfg.out) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(EXIT_VALIDATION);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}
