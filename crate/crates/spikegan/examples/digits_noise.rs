//! Robustness to label-preserving pixel corruption: train the digit
//! generator on progressively noisier data and score each run with
//! train-real-test-synthetic (TRTS) under a time-surface decoder, next to
//! the classifier's accuracy on equally noisy real data.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::DigitsNoise).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("digits_noise");
    cfg.iterations = 200;
    cfg.noise_fractions = vec![0.0, 0.2];
    common::run_and_report("digits_noise", &cfg);
}
