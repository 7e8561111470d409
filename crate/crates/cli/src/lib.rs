//! Configuration, orchestration and output of the `ckn-lab` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use std::fs;
use std::path::Path;

use clap::{Arg, ArgAction};
use serde::Serialize;

use crate::commands::{execute, Outcome};
use crate::config::{parse_config, Command, ConfigError, RunConfig, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONVERGENT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

pub fn cli() -> clap::Command {
    let mut c = clap::Command::new("ckn-lab")
        .about("Numerical laboratory for the 1D fractional CKN inequality and its Onofri limit")
        .arg(
            Arg::new("command")
                .value_parser(Command::ALL.map(|c| c.name()))
                .help("subcommand; may also come from the config file"),
        )
        .arg(Arg::new("config").long("config").short('c').value_name("FILE").help("key = value configuration file"))
        .arg(Arg::new("list-keys").long("list-keys").action(ArgAction::SetTrue).help("print every configuration key"));
    for (key, help) in KEYS.iter().filter(|(k, _)| *k != "command") {
        c = c.arg(Arg::new(*key).long(flag_name(key)).value_name("VALUE").allow_negative_numbers(true).help(*help));
    }
    c
}

/// Builds the run configuration from the arguments: defaults, then the file,
/// then the flags.
pub fn configure<I, T>(args: I) -> Result<Option<RunConfig>, String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let m = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            print!("{}", e.render());
            return Ok(None);
        }
        Err(e) => return Err(e.render().to_string().trim_start_matches("error: ").trim_end().to_owned()),
    };
    if m.get_flag("list-keys") {
        for (k, h) in KEYS {
            println!("{k:18} {h}");
        }
        return Ok(None);
    }
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
            parse_config(&text).map_err(|e| format!("{path}: {e}"))?
        }
        None => RunConfig::default(),
    };
    for (key, _) in KEYS.iter().filter(|(k, _)| *k != "command") {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v).map_err(|e| {
                let message = e.unwrap_or_else(|| "unknown key".into());
                format!("--{}: {message}", flag_name(key))
            })?;
        }
    }
    if let Some(c) = m.get_one::<String>("command") {
        cfg.command = Some(c.parse()?);
    }
    cfg.validate().map_err(|e: ConfigError| e.to_string())?;
    if cfg.command.is_none() {
        return Err("no command given (positional argument or `command` key)".into());
    }
    Ok(Some(cfg))
}

#[derive(Serialize)]
struct ErrorLog {
    kind: &'static str,
    message: String,
}

fn write_all(dir: &Path, outcome: &Outcome) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

/// Runs a configured command and returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let command = cfg.command.expect("validated configuration has a command");
    match execute(command, cfg) {
        Ok(outcome) => {
            if let Err(e) = write_all(&cfg.out_dir, &outcome) {
                eprintln!("error: cannot write to {}: {e}", cfg.out_dir.display());
                return EXIT_CONFIG;
            }
            for a in &outcome.artifacts {
                println!("wrote {}", cfg.out_dir.join(&a.name).display());
            }
            if outcome.ok {
                EXIT_OK
            } else {
                eprintln!("{command}: not every unit converged or passed");
                EXIT_NONCONVERGENT
            }
        }
        Err(e) => {
            let log = output::to_json(command.name(), &ErrorLog { kind: "computation", message: e.to_string() });
            eprint!("{log}");
            let _ = fs::create_dir_all(&cfg.out_dir).and_then(|_| fs::write(cfg.out_dir.join("error.json"), log));
            EXIT_NONCONVERGENT
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match configure(args) {
        Ok(Some(cfg)) => run(&cfg),
        Ok(None) => EXIT_OK,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}
