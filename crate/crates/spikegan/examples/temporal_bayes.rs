//! Train an ensemble of generator particles with Stein variational gradient
//! descent against a shared discriminator. The kernel's repulsion term keeps
//! the particles apart, so different particles can settle on different data
//! modes; the per-particle coverage fractions show the split.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::TemporalBayes).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("temporal_bayes");
    cfg.iterations = 200;
    cfg.particles = 3;
    cfg.eval_every = 0; // only the final per-particle coverage
    common::run_and_report("temporal_bayes", &cfg);
}
