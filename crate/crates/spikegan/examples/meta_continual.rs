//! Continual meta-learning over a stream of digit-pair tasks (labels 0-6,
//! random rotations). A first-order meta-update nudges the shared
//! initialization toward each task's adapted weights, so later tasks adapt
//! in fewer within-task iterations; continual.csv logs the TRTS trend.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::MetaContinual).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("meta_continual");
    cfg.tasks = 12;
    cfg.batches_per_task = 2;
    cfg.k_steps = 5;
    cfg.eval_every = 4;
    cfg.eval_samples = 100;
    common::run_and_report("meta_continual", &cfg);
}
