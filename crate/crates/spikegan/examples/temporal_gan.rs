//! Train a single probabilistic spiking neuron adversarially against a
//! convolutional discriminator on a 50-50 mixture of bursting and tonic
//! spike trains, then report how much of each mode it covers.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::TemporalGan).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("temporal_gan");
    cfg.iterations = 300;
    cfg.eval_every = 100;
    common::run_and_report("temporal_gan", &cfg);
}
