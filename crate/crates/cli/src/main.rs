//! `qdarwin`: runs the redundancy, partial-information, sweep and oracle
//! experiments from a flat config file. Any config key can also be given as a
//! flag of the same name, which wins over the file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use qdarwin::experiments::config::KEYS;
use qdarwin::experiments::{oracle, runs, ExperimentConfig, RunOutput};
use qdarwin::Error;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn shared_args(cmd: Command) -> Command {
    let cmd = cmd
        .arg(Arg::new("config").long("config").short('c').value_name("FILE").help("config file"))
        .arg(Arg::new("seed").long("seed").value_name("N").help("override master_seed"))
        .arg(Arg::new("out").long("out").value_name("DIR").help("override output_dir"))
        .arg(
            Arg::new("workers")
                .long("workers")
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .default_value("1")
                .help("worker threads"),
        );
    KEYS.iter().fold(cmd, |cmd, &key| {
        cmd.arg(Arg::new(key).long(key).value_name("VALUE").action(ArgAction::Set).hide(true))
    })
}

fn cli() -> Command {
    let sub = |name: &'static str, about: &'static str| shared_args(Command::new(name).about(about));
    Command::new("qdarwin")
        .about("Quantum Darwinism and non-Markovianity of an oscillator in a Rubin bath")
        .subcommand_required(true)
        .subcommand(sub("redundancy", "f_delta(t) for every omega_s, written to redundancy.csv"))
        .subcommand(sub("partial-info", "I(S:f) at t_max for every omega_s, written to partial_info.csv"))
        .subcommand(sub("sweep", "N, f_delta, N_f and H_S per omega_s, written to sweep.csv"))
        .subcommand(sub("oracle", "compare the propagator with step-halved RK4 integration"))
        .subcommand(sub("validate", "parse and validate the config without computing"))
}

fn load(m: &ArgMatches) -> Result<(ExperimentConfig, usize), Error> {
    let text = match m.get_one::<String>("config") {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter_map(|&k| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    for (flag, key) in [("seed", "master_seed"), ("out", "output_dir")] {
        if let Some(v) = m.get_one::<String>(flag) {
            overrides.push((key.to_string(), v.clone()));
        }
    }
    let cfg = ExperimentConfig::from_sources(&text, &overrides)?;
    Ok((cfg, *m.get_one::<usize>("workers").expect("has a default")))
}

fn write_output(out: &RunOutput, dir: &Path, name: &str, label: &str) -> Result<PathBuf, Error> {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let path = dir.join(name);
    out.table.write(&path, label)?;
    Ok(path)
}

fn run(name: &str, m: &ArgMatches) -> Result<(), Error> {
    let (cfg, workers) = load(m)?;
    let dir = cfg.output_dir.clone();
    let written = match name {
        "validate" => {
            println!("config ok: {} omega_s value(s), {} bath oscillators", cfg.omega_s.len(), cfg.n_osc);
            return Ok(());
        }
        "oracle" => {
            let reports = oracle::run_oracle(&cfg)?;
            let mut ok = true;
            for r in &reports {
                println!(
                    "omega_s={} max_deviation={:e} tolerance={:e} steps={} {}",
                    r.omega_s,
                    r.max_deviation,
                    oracle::ORACLE_TOL,
                    r.steps_per_checkpoint,
                    if r.passed { "PASS" } else { "FAIL" }
                );
                ok &= r.passed;
            }
            if !ok {
                return Err(Error::Consistency("propagator disagrees with the integration oracle".into()));
            }
            return Ok(());
        }
        "redundancy" => write_output(&runs::run_redundancy(&cfg, workers)?, &dir, "redundancy.csv", name)?,
        "partial-info" => write_output(&runs::run_partial_info(&cfg, workers)?, &dir, "partial_info.csv", name)?,
        "sweep" => write_output(&runs::run_sweep(&cfg, workers)?, &dir, "sweep.csv", name)?,
        other => unreachable!("unknown subcommand {other}"),
    };
    println!("wrote {}", written.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        e if e.is_config() => EXIT_CONFIG,
        Error::Unstable { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    match run(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn flags_override_keys() {
        let m = cli().get_matches_from(["qdarwin", "validate", "--n_osc", "10", "--seed", "7", "--omega_s", "0.4,0.6"]);
        let (_, sub) = m.subcommand().unwrap();
        let (cfg, workers) = load(sub).unwrap();
        assert_eq!(cfg.n_osc, 10);
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.omega_s, vec![0.4, 0.6]);
        assert_eq!(workers, 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config { field: "x".into(), message: String::new() }), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Unstable { min_eigenvalue: -1.0 }), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::NotCompletelyPositive(-1.0)), EXIT_NUMERICAL);
    }
}
