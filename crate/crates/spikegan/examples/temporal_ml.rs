//! Train the same spiking generator by maximum likelihood with clamped
//! read-outs instead of adversarially. Likelihood training averages over the
//! data, so on a bimodal burst/tonic mixture it tends to land between the
//! modes — compare the coverage fractions with the temporal_gan example.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::TemporalMl).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("temporal_ml");
    cfg.iterations = 200;
    cfg.eval_every = 0;
    common::run_and_report("temporal_ml", &cfg);
}
