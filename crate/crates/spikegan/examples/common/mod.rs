//! Shared glue for the runnable examples: run an experiment config into
//! target/example-runs/<name> and echo the named metrics it produced.

use std::path::PathBuf;

use spikegan::config::ExperimentConfig;
use spikegan::experiment::run;

pub fn out_dir(name: &str) -> PathBuf {
    PathBuf::from("target/example-runs").join(name)
}

pub fn run_and_report(name: &str, cfg: &ExperimentConfig) {
    let report = run(cfg).expect("experiment failed");
    println!("wrote {} metric rows to {}", report.metric_rows, report.out_dir.display());
    let text = std::fs::read_to_string(report.out_dir.join("metrics.csv")).unwrap();
    let named: Vec<&str> = text
        .lines()
        .skip(1)
        .filter(|l| !l.ends_with(",,"))
        .collect();
    println!("named metrics from {}:", name);
    for line in named.iter().rev().take(12).rev() {
        let mut f = line.split(',');
        let iter = f.next().unwrap();
        let metric = f.nth(4).unwrap();
        let value = f.next().unwrap();
        println!("  iter {:>6}  {:<28} {}", iter, metric, value);
    }
}
