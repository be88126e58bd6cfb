//! Fully spike-domain pipeline: the discriminator is a 1-D CNN reading raw
//! spike trains, with no decoding between generator and critic. Compares
//! four TSTR numbers: real rate-encoded data, the CNN-discriminator
//! generator, a decoder-based generator, and a likelihood-trained generator.

mod common;

use spikegan::config::{ExperimentConfig, ExperimentId, Preset};

fn main() {
    let mut cfg = ExperimentConfig::new(ExperimentId::NeuromorphicGan).with_preset(Preset::Desk);
    cfg.out_dir = common::out_dir("neuromorphic_gan");
    cfg.iterations = 200;
    cfg.eval_samples = 200;
    common::run_and_report("neuromorphic_gan", &cfg);
}
