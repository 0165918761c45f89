//! Command-line front end: `adgnn <command> [--config FILE] [--key VALUE ...]`.
//!
//! Every key of [`RunConfig`] is accepted as a flag on every command, spelled
//! `--some-key` (or `--some_key`). Exit codes: 0 success, 1 usage or config
//! error, 2 data error, 3 numeric failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

pub use commands::{
    cmd_diffuse, cmd_energy_check, cmd_eval, cmd_gen_synth, cmd_oversmooth_bench, cmd_train, GRADIENT_TOLERANCE,
    NEUMANN_WARN_BOUND, RECOVERY_TOLERANCE, RESOLVED_CONFIG_FILE,
};
pub use config::{DiffuseMode, EnergyMapping, RunConfig, KEYS};

use crate::error::{Error, Result};

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("train", "train over several seeds; writes checkpoints, metrics.csv, summary.json"),
    ("eval", "evaluate a checkpoint on every split"),
    ("diffuse", "export source, local or global embeddings of the raw features"),
    ("energy-check", "verify that the energy minimizer recovers the global embeddings"),
    ("oversmooth-bench", "passive vs active diffusion: Dirichlet energy and row distances per step"),
    ("gen-synth", "write a stochastic block model dataset"),
];

pub fn command() -> Command {
    let mut cmd = Command::new("adgnn")
        .about("Active diffusion graph neural network")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key = value file applied before flags"),
        );
    for (key, help) in KEYS {
        let flag = key.replace('_', "-");
        let mut arg = Arg::new(*key)
            .long(flag.clone())
            .global(true)
            .action(ArgAction::Set)
            .value_name("VALUE")
            .help(*help);
        if flag != *key {
            arg = arg.alias(*key);
        }
        cmd = cmd.arg(arg);
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

/// Defaults, then the `--config` file, then explicit flags.
pub fn resolve(matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        cfg.apply_file(&PathBuf::from(path))?;
    }
    for (key, _) in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    Ok(cfg)
}

/// Runs one subcommand and returns its JSON report.
pub fn execute(name: &str, cfg: &RunConfig) -> Result<serde_json::Value> {
    match name {
        "train" => cmd_train(cfg),
        "eval" => cmd_eval(cfg),
        "diffuse" => cmd_diffuse(cfg),
        "energy-check" => cmd_energy_check(cfg),
        "oversmooth-bench" => cmd_oversmooth_bench(cfg),
        "gen-synth" => cmd_gen_synth(cfg),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let outcome = resolve(sub).and_then(|cfg| execute(name, &cfg));
    match outcome {
        Ok(report) => {
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let text = serde_json::to_string_pretty(&report).expect("serializable json");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        let m = command().try_get_matches_from(args).unwrap();
        resolve(m.subcommand().unwrap().1)
    }

    #[test]
    fn flags_override_defaults_in_both_spellings() {
        let c = parse(&["adgnn", "train", "--learning-rate", "0.5", "--hidden_dim", "7"]).unwrap();
        assert_eq!(c.learning_rate, 0.5);
        assert_eq!(c.hidden_dim, 7);
        let c = parse(&["adgnn", "--seeds", "2", "diffuse"]).unwrap();
        assert_eq!(c.seeds, 2);
    }

    #[test]
    fn flags_override_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let file = tmp.path().join("run.cfg");
        std::fs::write(&file, "seeds = 3\nalpha = 0.2\ndelta = 0.7\n").unwrap();
        let c = parse(&["adgnn", "train", "--config", file.to_str().unwrap(), "--seeds", "9"]).unwrap();
        assert_eq!((c.seeds, c.alpha, c.delta), (9, 0.2, 0.7));
    }

    #[test]
    fn unknown_flag_exits_with_usage_code() {
        assert_eq!(run(["adgnn", "train", "--no-such-key", "1"]), 1);
        assert_eq!(run(["adgnn", "train", "--head", "gat"]), 1);
        assert_eq!(run(["adgnn", "--help"]), 0);
    }

    #[test]
    fn every_subcommand_is_registered() {
        let cmd = command();
        for name in ["train", "eval", "diffuse", "energy-check", "oversmooth-bench", "gen-synth"] {
            assert!(cmd.find_subcommand(name).is_some(), "{name}");
        }
    }
}
