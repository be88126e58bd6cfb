//! Conditionally generate rate-encoded handwritten digits (a two-class
//! subset) and score the generator with train-synthetic-test-real (TSTR):
//! a classifier fitted on decoded synthetic samples is evaluated on held-out
//! real images, next to the same classifier fitted on real data.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::DigitsGan).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("digits_gan");
    cfg.iterations = 300;
    cfg.eval_every = 150;
    cfg.eval_samples = 200;
    common::run_and_report("digits_gan", &cfg);
}
