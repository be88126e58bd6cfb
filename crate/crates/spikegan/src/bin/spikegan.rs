//! Thin command-line front end for the experiment runner.
//!
//! Usage:
//!   spikegan run <config-path> [--seed N] [--out DIR] [--preset paper|desk]
//!
//! Exit codes: 0 success, 1 configuration error, 2 numeric failure,
//! 3 failed gradient check.

use std::path::PathBuf;
use std::process::ExitCode;

use spikegan::config::{ExperimentConfig, Preset};
use spikegan::error::Error;
use spikegan::experiment;

const USAGE: &str = "usage: spikegan run <config-path> [--seed N] [--out DIR] [--preset paper|desk]";

fn fail(msg: &str, code: u8) -> ExitCode {
    eprintln!("spikegan: {}", msg);
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.first().map(String::as_str) != Some("run") {
        return fail(USAGE, 1);
    }
    let mut config_path: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;
    let mut out: Option<PathBuf> = None;
    let mut preset: Option<Preset> = None;
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--seed" => match it.next().map(|v| v.parse::<u64>()) {
                Some(Ok(v)) => seed = Some(v),
                _ => return fail("--seed expects an unsigned integer", 1),
            },
            "--out" => match it.next() {
                Some(v) => out = Some(PathBuf::from(v)),
                None => return fail("--out expects a directory", 1),
            },
            "--preset" => match it.next().map(String::as_str) {
                Some("paper") => preset = Some(Preset::Paper),
                Some("desk") => preset = Some(Preset::Desk),
                _ => return fail("--preset expects 'paper' or 'desk'", 1),
            },
            other if config_path.is_none() && !other.starts_with('-') => {
                config_path = Some(PathBuf::from(other));
            }
            other => return fail(&format!("unexpected argument '{}'\n{}", other, USAGE), 1),
        }
    }
    let Some(config_path) = config_path else {
        return fail(USAGE, 1);
    };

    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => return fail(&format!("cannot read {}: {}", config_path.display(), e), 1),
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(&format!("{}: {}", config_path.display(), e), 1),
    };
    if let Some(p) = preset {
        cfg = cfg.with_preset(p);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }

    match experiment::run(&cfg) {
        Ok(report) => {
            if report.gradcheck_passed == Some(false) {
                return fail("gradient check failed", 3);
            }
            println!(
                "{}: wrote {} metric rows to {}",
                cfg.experiment.name(),
                report.metric_rows,
                report.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(Error::Numeric(msg)) => fail(&format!("numeric failure: {}", msg), 2),
        Err(e) => fail(&e.to_string(), 1),
    }
}
