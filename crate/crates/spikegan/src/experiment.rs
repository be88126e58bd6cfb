//! Experiment runner: turns an [`ExperimentConfig`] into an artifact
//! directory holding the echoed config, a metrics CSV, checkpoints, and SVG
//! plots. Every run is reproducible from (config, seed) alone.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{exp_basis, raised_cosine_basis, rate_decode, rate_encode, time_surface_decode, BasisMatrix};
use crate::config::{BasisKind, DecodeMode, ExperimentConfig, ExperimentId, parse_conv_spec};
use crate::datasets::{
    corrupt, load_digits, make_burst_tonic, make_task, step_input, LabeledImage, Rotation,
    IMAGE_PIXELS, IMAGE_SIDE,
};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy, mode_coverage, pca_compare, train_classifier, trts, tstr, ClassifierCfg,
    ClassifierSpec, LabeledFeatures,
};
use crate::meta::{
    run_continual, within_task_update, ContinualLogRow, ContinualSchedule, HyperParams,
    TaskDataBuffer,
};
use crate::plot;
use crate::snn::{
    forward_sample, log_likelihood, EpisodeRunner, SnnGrads, SnnParams, SnnTopology, SpikeTrain,
};
use crate::tensor::{
    backward, conv1d_out_len, forward, Activation, AnnParams, Layer, Matrix,
};
#[cfg(test)]
use crate::tensor::GanMode;
use crate::training::{
    bayes_spikegan_step, ml_train_step, spikegan_step, DiscEncoding, GanStepMetrics, ParticleSet,
    TrainConfig,
};

/// What a completed run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    /// populated only by the gradcheck experiment
    pub gradcheck_passed: Option<bool>,
    pub metric_rows: usize,
}

/// Execute the configured experiment end to end.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut arts = Artifacts::create(cfg)?;
    let gradcheck_passed = match cfg.experiment {
        ExperimentId::Gradcheck => {
            let results = gradcheck(cfg.seed);
            let mut all_ok = true;
            for r in &results {
                arts.metric(0, &format!("gradcheck_{}", r.name), r.max_rel_err);
                all_ok &= r.ok;
            }
            arts.metric(0, "gradcheck_pass", if all_ok { 1.0 } else { 0.0 });
            Some(all_ok)
        }
        ExperimentId::TemporalGan => {
            run_temporal_gan(cfg, &mut arts)?;
            None
        }
        ExperimentId::TemporalBayes => {
            run_temporal_bayes(cfg, &mut arts)?;
            None
        }
        ExperimentId::TemporalMl => {
            run_temporal_ml(cfg, &mut arts)?;
            None
        }
        ExperimentId::DigitsGan => {
            run_digits_gan(cfg, &mut arts)?;
            None
        }
        ExperimentId::DigitsNoise => {
            run_digits_noise(cfg, &mut arts)?;
            None
        }
        ExperimentId::NeuromorphicGan => {
            run_neuromorphic(cfg, &mut arts)?;
            None
        }
        ExperimentId::MetaContinual => {
            run_meta_continual(cfg, &mut arts)?;
            None
        }
    };
    let rows = arts.rows();
    arts.finish()?;
    Ok(RunReport { out_dir: cfg.out_dir.clone(), gradcheck_passed, metric_rows: rows })
}

// ---------------------------------------------------------------------------
// artifact plumbing

/// Collects metrics rows in memory and writes files under the run directory.
pub struct Artifacts {
    dir: PathBuf,
    rows: Vec<String>,
}

impl Artifacts {
    pub fn create(cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out_dir)?;
        fs::write(cfg.out_dir.join("config.txt"), cfg.echo())?;
        Ok(Artifacts { dir: cfg.out_dir.clone(), rows: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Per-iteration training losses and discriminator outputs.
    pub fn training_row(&mut self, iter: usize, m: &GanStepMetrics) {
        self.rows.push(format!(
            "{},{},{},{},{},,",
            iter, m.disc_loss, m.gen_loss, m.mean_d_real, m.mean_d_synth
        ));
    }

    /// A named evaluation metric attached to an iteration.
    pub fn metric(&mut self, iter: usize, name: &str, value: f64) {
        self.rows.push(format!("{},,,,,{},{}", iter, name, value));
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn write_svg(&self, name: &str, content: &str) -> Result<()> {
        fs::write(self.dir.join(name), content)?;
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        let mut out = String::from(
            "iter,disc_loss,gen_loss,mean_d_real,mean_d_synth,metric,value\n",
        );
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        fs::write(self.dir.join("metrics.csv"), out)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// checkpoints

const CHECKPOINT_MAGIC: &[u8; 4] = b"SPKC";
const CHECKPOINT_VERSION: u32 = 1;

/// Full mid-run state: iteration counter, every generator particle, the
/// discriminator, and the training RNG. Round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub gen_flats: Vec<Vec<f64>>,
    pub disc_flat: Vec<f64>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

impl Checkpoint {
    pub fn capture(
        iteration: u64,
        gens: &[&SnnParams],
        disc: &AnnParams,
        rng: &ChaCha8Rng,
    ) -> Self {
        Checkpoint {
            iteration,
            gen_flats: gens.iter().map(|g| g.to_flat()).collect(),
            disc_flat: disc.to_flat(),
            rng_seed: rng.get_seed(),
            rng_stream: rng.get_stream(),
            rng_word_pos: rng.get_word_pos(),
        }
    }

    /// Rebuild the RNG exactly where it was captured.
    pub fn restore_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.rng_seed);
        rng.set_stream(self.rng_stream);
        rng.set_word_pos(self.rng_word_pos);
        rng
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.iteration.to_le_bytes());
        buf.extend_from_slice(&self.rng_seed);
        buf.extend_from_slice(&self.rng_stream.to_le_bytes());
        buf.extend_from_slice(&self.rng_word_pos.to_le_bytes());
        buf.extend_from_slice(&(self.gen_flats.len() as u32).to_le_bytes());
        for flat in &self.gen_flats {
            buf.extend_from_slice(&(flat.len() as u64).to_le_bytes());
            for v in flat {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf.extend_from_slice(&(self.disc_flat.len() as u64).to_le_bytes());
        for v in &self.disc_flat {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = fs::File::open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(4)? != &CHECKPOINT_MAGIC[..] {
            return Err(Error::Parse("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {}", version)));
        }
        let iteration = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let rng_seed: [u8; 32] = cur.take(32)?.try_into().unwrap();
        let rng_stream = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let rng_word_pos = u128::from_le_bytes(cur.take(16)?.try_into().unwrap());
        let n_gens = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let mut gen_flats = Vec::with_capacity(n_gens);
        for _ in 0..n_gens {
            gen_flats.push(cur.take_f64s()?);
        }
        let disc_flat = cur.take_f64s()?;
        if cur.pos != buf.len() {
            return Err(Error::Parse("trailing bytes in checkpoint".into()));
        }
        Ok(Checkpoint { iteration, gen_flats, disc_flat, rng_seed, rng_stream, rng_word_pos })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn take_f64s(&mut self) -> Result<Vec<f64>> {
        let n = u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(f64::from_le_bytes(self.take(8)?.try_into().unwrap()));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// gradient checking

#[derive(Debug, Clone)]
pub struct GradcheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub ok: bool,
}

const GRADCHECK_TOL: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / denom
    }
}

fn ann_fd_check(params: &AnnParams, input: &Matrix, probe: &[f64]) -> f64 {
    let loss = |p: &AnnParams| -> f64 {
        let (out, _) = forward(p, input).unwrap();
        out.data.iter().zip(probe).map(|(o, w)| o * w).sum()
    };
    let (_, mut tape) = forward(params, input).unwrap();
    let analytic = backward(
        params,
        &mut tape,
        &Matrix { rows: probe.len(), cols: 1, data: probe.to_vec() },
    )
    .unwrap()
    .to_flat();
    let flat = params.to_flat();
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        let mut p = params.clone();
        let mut f = flat.clone();
        f[i] += step;
        p.set_flat(&f).unwrap();
        let up = loss(&p);
        f[i] -= 2.0 * step;
        p.set_flat(&f).unwrap();
        let down = loss(&p);
        worst = worst.max(rel_err((up - down) / (2.0 * step), analytic[i]));
    }
    worst
}

/// Finite-difference verification of every layer type and of the episode
/// log-likelihood gradient accumulation. Deterministic in `seed`.
pub fn gradcheck(seed: u64) -> Vec<GradcheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    let mut push = |name: &str, err: f64| {
        results.push(GradcheckResult {
            name: name.into(),
            max_rel_err: err,
            ok: err < GRADCHECK_TOL,
        });
    };

    // dense stack
    let dense = AnnParams::new(vec![
        Layer::dense(6, 5, Activation::LeakyRelu(0.01), &mut rng),
        Layer::dense(5, 3, Activation::Sigmoid, &mut rng),
    ]);
    let input = Matrix::column(&(0..6).map(|_| rng.gen::<f64>() - 0.5).collect::<Vec<_>>());
    let probe: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
    push("dense", ann_fd_check(&dense, &input, &probe));

    // conv stack with flatten and dense head
    let conv = AnnParams::new(vec![
        Layer::conv1d(2, 3, 3, 2, Activation::LeakyRelu(0.01), &mut rng),
        Layer::Flatten,
        Layer::dense(3 * conv1d_out_len(9, 3, 2).unwrap(), 1, Activation::Sigmoid, &mut rng),
    ]);
    let cin = Matrix {
        rows: 2,
        cols: 9,
        data: (0..18).map(|_| rng.gen::<f64>() - 0.5).collect(),
    };
    push("conv", ann_fd_check(&conv, &cin, &[1.0]));

    // episode log-likelihood gradient on a recurrent generator
    let topo = SnnTopology::layered(2, 2, 2).unwrap();
    let basis = exp_basis(4, 2.0).unwrap();
    let gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
    let t = 6;
    let mut y = SpikeTrain::zeros(2, t);
    for i in 0..2 {
        for tau in 0..t {
            y.set(i, tau, rng.gen::<bool>());
        }
    }
    let trace = forward_sample(&gen, &topo, &y, &mut rng).unwrap();
    let x = trace.readout_train(&topo);
    let hidden_ids = topo.hidden();
    let mut h = SpikeTrain::zeros(hidden_ids.len(), t);
    for (row, &id) in hidden_ids.iter().enumerate() {
        for tau in 0..t {
            h.set(row, tau, trace.spikes.get(id, tau) == 1);
        }
    }
    // replay the sampled spikes to get the analytic gradient
    let mut runner = EpisodeRunner::new(&gen, &topo, &y).unwrap();
    let mut analytic = SnnGrads::zeros_like(&gen);
    for tau in 0..t {
        let u = runner.potentials();
        let spikes: Vec<bool> = (0..topo.n_neurons).map(|n| trace.spikes.get(n, tau) == 1).collect();
        runner.accumulate_grads(&spikes, &u, |_| 1.0, &mut analytic);
        runner.advance(&spikes);
    }
    let analytic = analytic.to_flat();
    let flat = gen.to_flat();
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        let mut g = gen.clone();
        let mut f = flat.clone();
        f[i] += step;
        g.set_flat(&f).unwrap();
        let up = log_likelihood(&g, &topo, &x, &h, &y).unwrap();
        f[i] -= 2.0 * step;
        g.set_flat(&f).unwrap();
        let down = log_likelihood(&g, &topo, &x, &h, &y).unwrap();
        worst = worst.max(rel_err((up - down) / (2.0 * step), analytic[i]));
    }
    push("episode", worst);

    results
}

// ---------------------------------------------------------------------------
// shared building blocks

/// Derive an independent deterministic RNG stream from the run seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn build_bases(cfg: &ExperimentConfig) -> Result<(BasisMatrix, BasisMatrix)> {
    let basis = match cfg.basis {
        BasisKind::Exponential => exp_basis(cfg.tau_w, cfg.tau_f)?,
        BasisKind::RaisedCosine => raised_cosine_basis(cfg.tau_w, cfg.basis_k)?,
    };
    Ok((basis.clone(), basis))
}

/// Assemble the discriminator for `n_channels` spike rows of length `t`
/// (raw-spike decode) or `n_features` decoded inputs.
pub fn build_discriminator(
    cfg: &ExperimentConfig,
    n_channels: usize,
    n_features: usize,
    rng: &mut impl Rng,
) -> Result<AnnParams> {
    match cfg.decode {
        DecodeMode::Rate | DecodeMode::TimeSurface => {
            let mut layers = Vec::new();
            let mut prev = n_features;
            for &h in &cfg.disc_hidden {
                layers.push(Layer::dense(prev, h, Activation::LeakyRelu(0.01), rng));
                prev = h;
            }
            layers.push(Layer::dense(prev, 1, Activation::Sigmoid, rng));
            Ok(AnnParams::new(layers))
        }
        DecodeMode::None => {
            if let Some(spec) = &cfg.conv_spec {
                let arch = parse_conv_spec(spec)?;
                let mut layers = Vec::new();
                let mut channels = n_channels;
                let mut len = cfg.t;
                for stage in &arch.convs {
                    len = conv1d_out_len(len, stage.kernel, stage.stride)?;
                    layers.push(Layer::conv1d(
                        channels,
                        stage.channels,
                        stage.kernel,
                        stage.stride,
                        Activation::LeakyRelu(0.01),
                        rng,
                    ));
                    channels = stage.channels;
                }
                layers.push(Layer::Flatten);
                let flat = channels * len;
                match arch.dense_head {
                    None | Some(1) => {
                        layers.push(Layer::dense(flat, 1, Activation::Sigmoid, rng))
                    }
                    Some(w) => {
                        layers.push(Layer::dense(flat, w, Activation::LeakyRelu(0.01), rng));
                        layers.push(Layer::dense(w, 1, Activation::Sigmoid, rng));
                    }
                }
                Ok(AnnParams::new(layers))
            } else {
                let mut layers = vec![Layer::Flatten];
                let mut prev = n_channels * cfg.t;
                for &h in &cfg.disc_hidden {
                    layers.push(Layer::dense(prev, h, Activation::LeakyRelu(0.01), rng));
                    prev = h;
                }
                layers.push(Layer::dense(prev, 1, Activation::Sigmoid, rng));
                Ok(AnnParams::new(layers))
            }
        }
    }
}

pub fn disc_encoding(cfg: &ExperimentConfig) -> DiscEncoding {
    match cfg.decode {
        DecodeMode::Rate => DiscEncoding::Rate,
        DecodeMode::TimeSurface => DiscEncoding::TimeSurface(cfg.tau_s),
        DecodeMode::None => DiscEncoding::Spikes,
    }
}

pub fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        mu_disc: cfg.mu_disc,
        mu_gen: cfg.mu_gen,
        batch: cfg.batch,
        t: cfg.t,
        gen_loss: cfg.gan_mode(),
        svgd_eta: cfg.svgd_eta,
        iterations: cfg.iterations,
        seed: cfg.seed,
    }
}

fn sample_pool<'a, T>(pool: &'a [T], n: usize, rng: &mut impl Rng) -> Vec<&'a T> {
    (0..n).map(|_| &pool[rng.gen_range(0..pool.len())]).collect()
}

fn clone_batch(pool: &[(SpikeTrain, SpikeTrain)], n: usize, rng: &mut impl Rng) -> Vec<(SpikeTrain, SpikeTrain)> {
    sample_pool(pool, n, rng).into_iter().cloned().collect()
}

fn maybe_checkpoint(
    cfg: &ExperimentConfig,
    arts: &Artifacts,
    iter: usize,
    gens: &[&SnnParams],
    disc: &AnnParams,
    rng: &ChaCha8Rng,
) -> Result<()> {
    if cfg.checkpoint_every > 0 && iter > 0 && iter % cfg.checkpoint_every == 0 {
        let ck = Checkpoint::capture(iter as u64, gens, disc, rng);
        ck.save(&arts.dir().join(format!("checkpoint_{:06}.bin", iter)))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// temporal experiments (single neuron, burst/tonic data)

fn temporal_pool(cfg: &ExperimentConfig) -> Result<Vec<(SpikeTrain, SpikeTrain)>> {
    let mut data_rng = rng_stream(cfg.seed, 1);
    let n = (cfg.batch * 4).max(200);
    let examples = make_burst_tonic(n, cfg.t, &mut data_rng)?;
    Ok(examples.into_iter().map(|e| (e.x, step_input(cfg.t))).collect())
}

fn temporal_topology(cfg: &ExperimentConfig) -> Result<SnnTopology> {
    SnnTopology::layered(1, cfg.hidden, 1)
}

fn coverage_metrics(
    arts: &mut Artifacts,
    iter: usize,
    tag: &str,
    gen: &SnnParams,
    topo: &SnnTopology,
    t: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let y = step_input(t);
    let samples: Vec<SpikeTrain> = (0..n)
        .map(|_| forward_sample(gen, topo, &y, rng).map(|tr| tr.readout_train(topo)))
        .collect::<Result<_>>()?;
    let cov = mode_coverage(&samples)?;
    arts.metric(iter, &format!("burst_fraction{}", tag), cov.burst_fraction);
    arts.metric(iter, &format!("tonic_fraction{}", tag), cov.tonic_fraction);
    arts.metric(iter, &format!("neither_fraction{}", tag), cov.neither_fraction);
    Ok(())
}

fn run_temporal_gan(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let pool = temporal_pool(cfg)?;
    let topo = temporal_topology(cfg)?;
    let (ba, bb) = build_bases(cfg)?;
    let mut rng = rng_stream(cfg.seed, 2);
    let mut gen = SnnParams::init(&topo, ba, bb, &mut rng);
    let mut disc = build_discriminator(cfg, 2, 2, &mut rng)?;
    let tc = train_config(cfg);
    let enc = disc_encoding(cfg);
    let mut losses = (Vec::new(), Vec::new());
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&pool, cfg.batch, &mut rng);
        let m = spikegan_step(&mut gen, &mut disc, &topo, &batch, enc, &tc, &mut rng)?;
        losses.0.push(m.disc_loss);
        losses.1.push(m.gen_loss);
        arts.training_row(iter, &m);
        if cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 {
            let mut eval_rng = rng_stream(cfg.seed, 1000 + iter as u64);
            coverage_metrics(arts, iter, "", &gen, &topo, cfg.t, cfg.eval_samples, &mut eval_rng)?;
        }
        maybe_checkpoint(cfg, arts, iter, &[&gen], &disc, &rng)?;
    }
    let mut eval_rng = rng_stream(cfg.seed, 3);
    coverage_metrics(arts, cfg.iterations, "", &gen, &topo, cfg.t, cfg.eval_samples, &mut eval_rng)?;
    let y = step_input(cfg.t);
    let rasters: Vec<SpikeTrain> = (0..8)
        .map(|_| forward_sample(&gen, &topo, &y, &mut eval_rng).map(|tr| tr.readout_train(&topo)))
        .collect::<Result<_>>()?;
    arts.write_svg("samples.svg", &plot::raster("generated episodes", &rasters)?)?;
    arts.write_svg(
        "losses.svg",
        &plot::line_chart(
            "adversarial losses",
            &[("discriminator", &losses.0), ("generator", &losses.1)],
        )?,
    )?;
    Ok(())
}

fn run_temporal_bayes(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let pool = temporal_pool(cfg)?;
    let topo = temporal_topology(cfg)?;
    let (ba, bb) = build_bases(cfg)?;
    let mut rng = rng_stream(cfg.seed, 2);
    let mut particles = ParticleSet::init(&topo, ba, bb, cfg.particles, &mut rng)?;
    let mut disc = build_discriminator(cfg, 2, 2, &mut rng)?;
    let tc = train_config(cfg);
    let enc = disc_encoding(cfg);
    let mut losses = (Vec::new(), Vec::new());
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&pool, cfg.batch, &mut rng);
        let m = bayes_spikegan_step(&mut particles, &mut disc, &topo, &batch, enc, &tc, &mut rng)?;
        losses.0.push(m.disc_loss);
        losses.1.push(m.gen_loss);
        arts.training_row(iter, &m);
        if cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 {
            let mut eval_rng = rng_stream(cfg.seed, 1000 + iter as u64);
            for (j, p) in particles.particles.iter().enumerate() {
                coverage_metrics(
                    arts,
                    iter,
                    &format!("_p{}", j),
                    p,
                    &topo,
                    cfg.t,
                    cfg.eval_samples,
                    &mut eval_rng,
                )?;
            }
        }
        let refs: Vec<&SnnParams> = particles.particles.iter().collect();
        maybe_checkpoint(cfg, arts, iter, &refs, &disc, &rng)?;
    }
    let mut eval_rng = rng_stream(cfg.seed, 3);
    let y = step_input(cfg.t);
    let mut rasters = Vec::new();
    for (j, p) in particles.particles.iter().enumerate() {
        coverage_metrics(
            arts,
            cfg.iterations,
            &format!("_p{}", j),
            p,
            &topo,
            cfg.t,
            cfg.eval_samples,
            &mut eval_rng,
        )?;
        for _ in 0..3 {
            rasters.push(forward_sample(p, &topo, &y, &mut eval_rng)?.readout_train(&topo));
        }
    }
    arts.write_svg("samples.svg", &plot::raster("episodes per particle", &rasters)?)?;
    arts.write_svg(
        "losses.svg",
        &plot::line_chart(
            "adversarial losses",
            &[("discriminator", &losses.0), ("generator", &losses.1)],
        )?,
    )?;
    Ok(())
}

fn run_temporal_ml(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let pool = temporal_pool(cfg)?;
    let topo = temporal_topology(cfg)?;
    let (ba, bb) = build_bases(cfg)?;
    let mut rng = rng_stream(cfg.seed, 2);
    let mut gen = SnnParams::init(&topo, ba, bb, &mut rng);
    let tc = train_config(cfg);
    let mut lls = Vec::new();
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&pool, cfg.batch, &mut rng);
        let m = ml_train_step(&mut gen, &topo, &batch, &tc, &mut rng)?;
        lls.push(m.mean_log_likelihood);
        arts.metric(iter, "mean_log_likelihood", m.mean_log_likelihood);
        if cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 {
            let mut eval_rng = rng_stream(cfg.seed, 1000 + iter as u64);
            coverage_metrics(arts, iter, "", &gen, &topo, cfg.t, cfg.eval_samples, &mut eval_rng)?;
        }
        maybe_checkpoint(cfg, arts, iter, &[&gen], &AnnParams::new(vec![]), &rng)?;
    }
    let mut eval_rng = rng_stream(cfg.seed, 3);
    coverage_metrics(arts, cfg.iterations, "", &gen, &topo, cfg.t, cfg.eval_samples, &mut eval_rng)?;
    let y = step_input(cfg.t);
    let rasters: Vec<SpikeTrain> = (0..8)
        .map(|_| forward_sample(&gen, &topo, &y, &mut eval_rng).map(|tr| tr.readout_train(&topo)))
        .collect::<Result<_>>()?;
    arts.write_svg("samples.svg", &plot::raster("generated episodes", &rasters)?)?;
    arts.write_svg("likelihood.svg", &plot::line_chart("training log-likelihood", &[("mean_ll", &lls)])?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// digit experiments

/// Locate the bundled digit set when the config names no dataset.
pub fn resolve_digits_path(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if let Some(p) = &cfg.dataset {
        return Ok(p.clone());
    }
    let candidates = [
        PathBuf::from("crates/spikegan/data/digits.csv"),
        PathBuf::from("data/digits.csv"),
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data/digits.csv"),
    ];
    candidates
        .iter()
        .find(|p| p.exists())
        .cloned()
        .ok_or_else(|| Error::Dataset("digits.csv not found; set the dataset key".into()))
}

/// Which digit labels this run models, in class-index order.
pub fn digit_classes(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.all_classes {
        (0..10).collect()
    } else {
        vec![cfg.digit_pair.0, cfg.digit_pair.1]
    }
}

/// Deterministic 80/20 split by index.
pub fn split_digits(images: Vec<LabeledImage>) -> (Vec<LabeledImage>, Vec<LabeledImage>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, img) in images.into_iter().enumerate() {
        if i % 5 == 4 {
            test.push(img);
        } else {
            train.push(img);
        }
    }
    (train, test)
}

/// Constant one-hot conditioning: the class row spikes at every step.
pub fn label_spikes(class_idx: usize, n_classes: usize, t: usize) -> SpikeTrain {
    let mut y = SpikeTrain::zeros(n_classes, t);
    for tau in 0..t {
        y.set(class_idx, tau, true);
    }
    y
}

/// Rate-encode one image against its class conditioning.
pub fn encode_digit(
    img: &LabeledImage,
    class_idx: usize,
    n_classes: usize,
    t: usize,
    rng: &mut impl Rng,
) -> Result<(SpikeTrain, SpikeTrain)> {
    let x = rate_encode(&img.pixels, t, rng)?;
    Ok((x, label_spikes(class_idx, n_classes, t)))
}

fn class_index(classes: &[usize], label: usize) -> Option<usize> {
    classes.iter().position(|&c| c == label)
}

/// Decoded features of a spike train in the classifier's space.
pub fn decoded_features(x: &SpikeTrain, decode: DecodeMode, tau_s: f64) -> Result<Vec<f64>> {
    match decode {
        DecodeMode::Rate | DecodeMode::None => Ok(rate_decode(x)),
        DecodeMode::TimeSurface => {
            let raw = time_surface_decode(x, tau_s)?;
            // normalize by the all-ones response so features stay near [0,1]
            let full: f64 = (0..x.t).map(|k| (-(k as f64) / tau_s).exp()).sum();
            Ok(raw.into_iter().map(|v| v / full).collect())
        }
    }
}

/// Draw labeled synthetic features, classes round-robin.
pub fn sample_synthetic_features(
    gen: &SnnParams,
    topo: &SnnTopology,
    n_classes: usize,
    n: usize,
    t: usize,
    decode: DecodeMode,
    tau_s: f64,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledFeatures>> {
    (0..n)
        .map(|i| {
            let class = i % n_classes;
            let y = label_spikes(class, n_classes, t);
            let x = forward_sample(gen, topo, &y, rng)?.readout_train(topo);
            Ok((decoded_features(&x, decode, tau_s)?, class))
        })
        .collect()
}

fn pixel_features(images: &[LabeledImage], classes: &[usize]) -> Vec<LabeledFeatures> {
    images
        .iter()
        .filter_map(|img| class_index(classes, img.label).map(|c| (img.pixels.clone(), c)))
        .collect()
}

fn classifier_for(classes: &[usize], cfg: &ExperimentConfig) -> (ClassifierSpec, ClassifierCfg) {
    (
        ClassifierSpec { in_dim: IMAGE_PIXELS, hidden: vec![100, 100], n_classes: classes.len() },
        ClassifierCfg { steps: cfg.clf_steps, lr: cfg.clf_lr, batch: cfg.clf_batch },
    )
}

fn digits_training_pool(
    train: &[LabeledImage],
    classes: &[usize],
    t: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(SpikeTrain, SpikeTrain)>> {
    let mut pool = Vec::new();
    for img in train {
        if let Some(c) = class_index(classes, img.label) {
            pool.push(encode_digit(img, c, classes.len(), t, rng)?);
        }
    }
    if pool.is_empty() {
        return Err(Error::Dataset("no training images in the requested classes".into()));
    }
    Ok(pool)
}

fn run_digits_gan(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let images = load_digits(&resolve_digits_path(cfg)?)?;
    let (train_imgs, test_imgs) = split_digits(images);
    let classes = digit_classes(cfg);
    let nc = classes.len();
    let mut data_rng = rng_stream(cfg.seed, 1);
    let pool = digits_training_pool(&train_imgs, &classes, cfg.t, &mut data_rng)?;
    let topo = SnnTopology::layered(nc, cfg.hidden, IMAGE_PIXELS)?;
    let (ba, bb) = build_bases(cfg)?;
    let mut rng = rng_stream(cfg.seed, 2);
    let mut gen = SnnParams::init(&topo, ba, bb, &mut rng);
    let mut disc = build_discriminator(cfg, IMAGE_PIXELS + nc, IMAGE_PIXELS + nc, &mut rng)?;
    let tc = train_config(cfg);
    let enc = disc_encoding(cfg);
    let (spec, ccfg) = classifier_for(&classes, cfg);
    let real_train = pixel_features(&train_imgs, &classes);
    let real_test = pixel_features(&test_imgs, &classes);

    // the real-data anchor every TSTR number is compared against
    let mut base_rng = rng_stream(cfg.seed, 4);
    let baseline_clf = train_classifier(&spec, &real_train, &ccfg, &mut base_rng)?;
    let baseline = accuracy(&baseline_clf, &real_test)?;
    arts.metric(0, "real_baseline_accuracy", baseline);

    let mut losses = (Vec::new(), Vec::new());
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&pool, cfg.batch, &mut rng);
        let m = spikegan_step(&mut gen, &mut disc, &topo, &batch, enc, &tc, &mut rng)?;
        losses.0.push(m.disc_loss);
        losses.1.push(m.gen_loss);
        arts.training_row(iter, &m);
        if cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 {
            let mut eval_rng = rng_stream(cfg.seed, 1000 + iter as u64);
            let synth = sample_synthetic_features(
                &gen, &topo, nc, cfg.eval_samples, cfg.t, cfg.decode, cfg.tau_s, &mut eval_rng,
            )?;
            let a = tstr(&synth, &real_test, &spec, &ccfg, &mut eval_rng)?;
            arts.metric(iter, "tstr", a);
        }
        maybe_checkpoint(cfg, arts, iter, &[&gen], &disc, &rng)?;
    }

    let mut eval_rng = rng_stream(cfg.seed, 3);
    let synth = sample_synthetic_features(
        &gen, &topo, nc, cfg.eval_samples, cfg.t, cfg.decode, cfg.tau_s, &mut eval_rng,
    )?;
    let a = tstr(&synth, &real_test, &spec, &ccfg, &mut eval_rng)?;
    arts.metric(cfg.iterations, "tstr", a);

    let real_feats: Vec<Vec<f64>> = real_train.iter().map(|(v, _)| v.clone()).collect();
    let synth_feats: Vec<Vec<f64>> = synth.iter().map(|(v, _)| v.clone()).collect();
    let (pr, ps, _) = pca_compare(&real_feats, &synth_feats, 2)?;
    arts.write_svg("pca.svg", &plot::scatter_2d("principal components", &pr, &ps)?)?;
    let grid: Vec<Vec<f64>> = synth_feats.iter().take(16).cloned().collect();
    arts.write_svg("samples.svg", &plot::image_grid("decoded samples", &grid, IMAGE_SIDE, 4)?)?;
    arts.write_svg(
        "losses.svg",
        &plot::line_chart(
            "adversarial losses",
            &[("discriminator", &losses.0), ("generator", &losses.1)],
        )?,
    )?;
    Ok(())
}

fn run_digits_noise(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let images = load_digits(&resolve_digits_path(cfg)?)?;
    let (train_imgs, test_imgs) = split_digits(images);
    let classes = digit_classes(cfg);
    let nc = classes.len();
    let (spec, ccfg) = classifier_for(&classes, cfg);
    let tc = train_config(cfg);
    let enc = disc_encoding(cfg);
    let (ba, bb) = build_bases(cfg)?;
    let topo = SnnTopology::layered(nc, cfg.hidden, IMAGE_PIXELS)?;

    for (fi, &fraction) in cfg.noise_fractions.iter().enumerate() {
        let mut data_rng = rng_stream(cfg.seed, 1 + 10 * fi as u64);
        let noisy_train: Vec<LabeledImage> = train_imgs
            .iter()
            .map(|img| corrupt(img, fraction, &mut data_rng))
            .collect::<Result<_>>()?;
        let noisy_test: Vec<LabeledImage> = test_imgs
            .iter()
            .map(|img| corrupt(img, fraction, &mut data_rng))
            .collect::<Result<_>>()?;
        let pool = digits_training_pool(&noisy_train, &classes, cfg.t, &mut data_rng)?;

        let mut rng = rng_stream(cfg.seed, 2 + 10 * fi as u64);
        let mut gen = SnnParams::init(&topo, ba.clone(), bb.clone(), &mut rng);
        let mut disc =
            build_discriminator(cfg, IMAGE_PIXELS + nc, IMAGE_PIXELS + nc, &mut rng)?;
        for iter in 0..cfg.iterations {
            let batch = clone_batch(&pool, cfg.batch, &mut rng);
            let m = spikegan_step(&mut gen, &mut disc, &topo, &batch, enc, &tc, &mut rng)?;
            arts.training_row(fi * cfg.iterations + iter, &m);
        }

        let mut eval_rng = rng_stream(cfg.seed, 3 + 10 * fi as u64);
        let real_train = pixel_features(&noisy_train, &classes);
        let real_test = pixel_features(&noisy_test, &classes);
        let clf = train_classifier(&spec, &real_train, &ccfg, &mut eval_rng)?;
        let baseline = accuracy(&clf, &real_test)?;
        let synth = sample_synthetic_features(
            &gen, &topo, nc, cfg.eval_samples, cfg.t, cfg.decode, cfg.tau_s, &mut eval_rng,
        )?;
        let trts_acc = accuracy(&clf, &synth)?;
        let iter = (fi + 1) * cfg.iterations;
        arts.metric(iter, &format!("trts@{}", fraction), trts_acc);
        arts.metric(iter, &format!("trts_baseline@{}", fraction), baseline);
    }
    Ok(())
}

fn run_neuromorphic(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let images = load_digits(&resolve_digits_path(cfg)?)?;
    let (train_imgs, test_imgs) = split_digits(images);
    let classes = digit_classes(cfg);
    let nc = classes.len();
    let mut data_rng = rng_stream(cfg.seed, 1);
    let pool = digits_training_pool(&train_imgs, &classes, cfg.t, &mut data_rng)?;
    let topo = SnnTopology::layered(nc, cfg.hidden, IMAGE_PIXELS)?;
    let (ba, bb) = build_bases(cfg)?;
    let tc = train_config(cfg);
    let (spec, ccfg) = classifier_for(&classes, cfg);
    let real_test = pixel_features(&test_imgs, &classes);

    // anchor: classifier trained on rate-encoded-then-decoded real data
    let mut eval_rng = rng_stream(cfg.seed, 3);
    let real_encoded: Vec<LabeledFeatures> = pool
        .iter()
        .zip(train_imgs.iter().filter(|img| class_index(&classes, img.label).is_some()))
        .map(|((x, _), img)| {
            Ok((rate_decode(x), class_index(&classes, img.label).unwrap()))
        })
        .collect::<Result<_>>()?;
    let tstr_real = tstr(&real_encoded, &real_test, &spec, &ccfg, &mut eval_rng)?;
    arts.metric(0, "tstr_real", tstr_real);

    // adversarial generator against the convolutional raw-spike discriminator
    let mut rng = rng_stream(cfg.seed, 2);
    let mut cnn_gen = SnnParams::init(&topo, ba.clone(), bb.clone(), &mut rng);
    let mut cnn_disc = build_discriminator(cfg, IMAGE_PIXELS + nc, IMAGE_PIXELS + nc, &mut rng)?;
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&pool, cfg.batch, &mut rng);
        let m = spikegan_step(&mut cnn_gen, &mut cnn_disc, &topo, &batch, DiscEncoding::Spikes, &tc, &mut rng)?;
        arts.training_row(iter, &m);
        maybe_checkpoint(cfg, arts, iter, &[&cnn_gen], &cnn_disc, &rng)?;
    }
    let synth_cnn = sample_synthetic_features(
        &cnn_gen, &topo, nc, cfg.eval_samples, cfg.t, DecodeMode::Rate, cfg.tau_s, &mut eval_rng,
    )?;
    let tstr_cnn = tstr(&synth_cnn, &real_test, &spec, &ccfg, &mut eval_rng)?;
    arts.metric(cfg.iterations, "tstr_cnn", tstr_cnn);

    // adversarial generator against a dense discriminator on decoded rates
    let mut rng = rng_stream(cfg.seed, 5);
    let mut dec_gen = SnnParams::init(&topo, ba.clone(), bb.clone(), &mut rng);
    let mut dec_cfg = cfg.clone();
    dec_cfg.decode = DecodeMode::Rate;
    let mut dec_disc =
        build_discriminator(&dec_cfg, IMAGE_PIXELS + nc, IMAGE_PIXELS + nc, &mut rng)?;
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&pool, cfg.batch, &mut rng);
        let m = spikegan_step(&mut dec_gen, &mut dec_disc, &topo, &batch, DiscEncoding::Rate, &tc, &mut rng)?;
        arts.training_row(cfg.iterations + iter, &m);
    }
    let synth_dec = sample_synthetic_features(
        &dec_gen, &topo, nc, cfg.eval_samples, cfg.t, DecodeMode::Rate, cfg.tau_s, &mut eval_rng,
    )?;
    let tstr_decoder = tstr(&synth_dec, &real_test, &spec, &ccfg, &mut eval_rng)?;
    arts.metric(2 * cfg.iterations, "tstr_decoder", tstr_decoder);

    // likelihood-trained generator with clamped read-outs; it models the
    // spike trains without labels, so its samples carry no class information
    // and synthetic labels are assigned round-robin at evaluation time
    let mut rng = rng_stream(cfg.seed, 6);
    let ml_topo = SnnTopology::layered(1, cfg.hidden, IMAGE_PIXELS)?;
    let mut ml_gen = SnnParams::init(&ml_topo, ba, bb, &mut rng);
    let ml_pool: Vec<(SpikeTrain, SpikeTrain)> =
        pool.iter().map(|(x, _)| (x.clone(), step_input(cfg.t))).collect();
    for iter in 0..cfg.iterations {
        let batch = clone_batch(&ml_pool, cfg.batch, &mut rng);
        let m = ml_train_step(&mut ml_gen, &ml_topo, &batch, &tc, &mut rng)?;
        arts.metric(2 * cfg.iterations + iter, "ml_mean_log_likelihood", m.mean_log_likelihood);
    }
    let y_const = step_input(cfg.t);
    let synth_ml: Vec<LabeledFeatures> = (0..cfg.eval_samples)
        .map(|i| {
            let x = forward_sample(&ml_gen, &ml_topo, &y_const, &mut eval_rng)?
                .readout_train(&ml_topo);
            Ok((rate_decode(&x), i % nc))
        })
        .collect::<Result<_>>()?;
    let tstr_ml = tstr(&synth_ml, &real_test, &spec, &ccfg, &mut eval_rng)?;
    arts.metric(3 * cfg.iterations, "tstr_ml", tstr_ml);

    let grid: Vec<Vec<f64>> = synth_cnn.iter().take(16).map(|(v, _)| v.clone()).collect();
    arts.write_svg("samples.svg", &plot::image_grid("decoded samples", &grid, IMAGE_SIDE, 4)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// continual meta-learning

/// Sample a digit-pair + rotation task over the training digits (0-6).
pub fn random_pair_task(
    source: &[LabeledImage],
    rng: &mut impl Rng,
) -> Result<(usize, Vec<LabeledImage>)> {
    let a = rng.gen_range(0..7usize);
    let mut b = rng.gen_range(0..6usize);
    if b >= a {
        b += 1;
    }
    let rot = Rotation::ALL[rng.gen_range(0..4)];
    let task_id = (a * 10 + b) * 4 + rot.quarter_turns();
    Ok((task_id, make_task(a, b, rot, source)?))
}

fn run_meta_continual(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<()> {
    let images = load_digits(&resolve_digits_path(cfg)?)?;
    let (train_imgs, _) = split_digits(images);
    let topo = SnnTopology::layered(2, cfg.hidden, IMAGE_PIXELS)?;
    let (ba, bb) = build_bases(cfg)?;
    let mut rng = rng_stream(cfg.seed, 2);
    let gen0 = SnnParams::init(&topo, ba, bb, &mut rng);
    let disc0 = build_discriminator(cfg, IMAGE_PIXELS + 2, IMAGE_PIXELS + 2, &mut rng)?;
    let hp0 = HyperParams { gen: gen0, disc: disc0 };
    let schedule = ContinualSchedule {
        tasks: cfg.tasks,
        batches_per_task: cfg.batches_per_task,
        batch_size: cfg.batch,
        n: cfg.meta_n,
        m: cfg.meta_m,
        k_steps: cfg.k_steps,
        mu_meta: cfg.mu_meta,
    };
    let tc = train_config(cfg);
    let enc = disc_encoding(cfg);
    let (spec, ccfg) = classifier_for(&[0, 1], cfg);
    let t = cfg.t;
    let eval_every = cfg.eval_every;
    let eval_samples = cfg.eval_samples;
    let decode = cfg.decode;
    let tau_s = cfg.tau_s;
    let seed = cfg.seed;

    // the evaluator needs the current task's images; share them via a cell
    let current_pool = std::cell::RefCell::new(Vec::<LabeledImage>::new());
    let topo_ref = &topo;
    let (snapshots, log) = run_continual(
        hp0.clone(),
        &topo,
        enc,
        |t_idx, stream_rng: &mut ChaCha8Rng| {
            let (task_id, imgs) = random_pair_task(&train_imgs, stream_rng)?;
            let examples: Vec<(SpikeTrain, SpikeTrain)> = imgs
                .iter()
                .map(|img| encode_digit(img, img.label, 2, t, stream_rng))
                .collect::<Result<_>>()?;
            *current_pool.borrow_mut() = imgs;
            let _ = t_idx;
            Ok((task_id, examples))
        },
        |_hp, adapted, t_idx, i| {
            if eval_every == 0 || i != 0 || t_idx % eval_every != 0 {
                return Ok(None);
            }
            let pool = current_pool.borrow();
            let real: Vec<LabeledFeatures> =
                pool.iter().map(|img| (img.pixels.clone(), img.label)).collect();
            let mut eval_rng = rng_stream(seed, 5000 + t_idx as u64);
            let synth = sample_synthetic_features(
                &adapted.gen, topo_ref, 2, eval_samples, t, decode, tau_s, &mut eval_rng,
            )?;
            Ok(Some(trts(&real, &synth, &spec, &ccfg, &mut eval_rng)?))
        },
        &schedule,
        &tc,
        &mut rng,
    )?;

    let mut csv = String::from(ContinualLogRow::csv_header());
    csv.push('\n');
    let mut trend = Vec::new();
    for row in &log {
        csv.push_str(&row.csv_row());
        csv.push('\n');
        if let Some(a) = row.trts_accuracy {
            trend.push(a);
        }
    }
    fs::write(arts.dir().join("continual.csv"), csv)?;
    for (i, row) in log.iter().enumerate() {
        if let Some(a) = row.trts_accuracy {
            arts.metric(i, "trts", a);
        }
    }
    if trend.len() > 1 {
        arts.write_svg(
            "trts.svg",
            &plot::line_chart("within-task TRTS over meta-time", &[("trts", &trend)])?,
        )?;
    }
    if let Some(hp) = snapshots.last() {
        Checkpoint::capture(log.len() as u64, &[&hp.gen], &hp.disc, &rng)
            .save(&arts.dir().join("meta_init.bin"))?;
    }
    Ok(())
}

/// Adapt an initialization on a held-out task and report TRTS; the
/// comparison behind the meta-learning benefit measure.
#[allow(clippy::too_many_arguments)]
pub fn heldout_task_trts(
    hp: &HyperParams,
    topo: &SnnTopology,
    task_images: &[LabeledImage],
    cfg: &ExperimentConfig,
    adapt_steps: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mut data = TaskDataBuffer::new();
    let examples: Vec<(SpikeTrain, SpikeTrain)> = task_images
        .iter()
        .map(|img| encode_digit(img, img.label, 2, cfg.t, rng))
        .collect::<Result<_>>()?;
    data.push_batch(&examples);
    let tc = train_config(cfg);
    let (adapted, _) =
        within_task_update(hp, &data, topo, disc_encoding(cfg), adapt_steps, &tc, rng)?;
    let real: Vec<LabeledFeatures> =
        task_images.iter().map(|img| (img.pixels.clone(), img.label)).collect();
    let (spec, ccfg) = classifier_for(&[0, 1], cfg);
    let synth = sample_synthetic_features(
        &adapted.gen, topo, 2, cfg.eval_samples, cfg.t, cfg.decode, cfg.tau_s, rng,
    )?;
    trts(&real, &synth, &spec, &ccfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;
    use tempfile::tempdir;

    #[test]
    fn gradcheck_all_layers_pass() {
        let results = gradcheck(0);
        assert_eq!(results.len(), 3);
        for r in &results {
            assert!(r.ok, "{} rel err {}", r.name, r.max_rel_err);
        }
    }

    #[test]
    fn gradcheck_experiment_reports_success() {
        let dir = tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentId::Gradcheck);
        cfg.out_dir = dir.path().join("run");
        let report = run(&cfg).unwrap();
        assert_eq!(report.gradcheck_passed, Some(true));
        assert!(cfg.out_dir.join("metrics.csv").exists());
        assert!(cfg.out_dir.join("config.txt").exists());
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        rng.set_stream(9);
        // advance mid-block so the word position is non-trivial
        for _ in 0..13 {
            rng.gen::<u64>();
        }
        let topo = SnnTopology::layered(2, 2, 1).unwrap();
        let basis = exp_basis(4, 2.0).unwrap();
        let gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let disc = AnnParams::new(vec![Layer::dense(3, 1, Activation::Sigmoid, &mut rng)]);
        let ck = Checkpoint::capture(42, &[&gen], &disc, &rng);
        let dir = tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ck);
        // the restored RNG continues identically
        let mut a = rng.clone();
        let mut b = loaded.restore_rng();
        for _ in 0..100 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        fs::write(&path, b"not a checkpoint").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    fn tiny_temporal_cfg(dir: &Path, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentId::TemporalGan).with_preset(Preset::Desk);
        cfg.out_dir = dir.to_path_buf();
        cfg.seed = seed;
        cfg.iterations = 4;
        cfg.batch = 5;
        cfg.t = 30;
        cfg.tau_w = 4;
        cfg.basis = crate::config::BasisKind::Exponential;
        cfg.eval_every = 2;
        cfg.eval_samples = 10;
        cfg.conv_spec = Some("c4k4s2x1".into());
        cfg
    }

    #[test]
    fn identical_seeds_give_byte_identical_metrics() {
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        run(&tiny_temporal_cfg(d1.path(), 7)).unwrap();
        run(&tiny_temporal_cfg(d2.path(), 7)).unwrap();
        let a = fs::read(d1.path().join("metrics.csv")).unwrap();
        let b = fs::read(d2.path().join("metrics.csv")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
        // and different seeds genuinely differ
        let d3 = tempdir().unwrap();
        run(&tiny_temporal_cfg(d3.path(), 8)).unwrap();
        let c = fs::read(d3.path().join("metrics.csv")).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn temporal_run_emits_all_artifacts() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_temporal_cfg(dir.path(), 1);
        cfg.checkpoint_every = 2;
        let report = run(&cfg).unwrap();
        assert!(report.metric_rows > 0);
        for name in ["config.txt", "metrics.csv", "samples.svg", "losses.svg"] {
            assert!(dir.path().join(name).exists(), "{} missing", name);
        }
        assert!(dir.path().join("checkpoint_000002.bin").exists());
        // echoed config reparses to the original
        let echoed = fs::read_to_string(dir.path().join("config.txt")).unwrap();
        assert_eq!(ExperimentConfig::parse(&echoed).unwrap(), cfg);
    }

    #[test]
    fn metrics_iterations_are_monotone() {
        let dir = tempdir().unwrap();
        run(&tiny_temporal_cfg(dir.path(), 2)).unwrap();
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let iters: Vec<usize> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(!iters.is_empty());
        assert!(iters.windows(2).all(|w| w[0] <= w[1]), "{:?}", iters);
    }

    #[test]
    fn missing_dataset_is_a_dataset_error() {
        let dir = tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentId::DigitsGan);
        cfg.out_dir = dir.path().to_path_buf();
        cfg.dataset = Some(PathBuf::from("/nonexistent/digits.csv"));
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn bad_conv_spec_for_short_episodes_is_config_error() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_temporal_cfg(dir.path(), 0);
        cfg.conv_spec = Some("c4k64s2x1".into()); // kernel longer than the episode
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn digit_helpers_are_consistent() {
        let y = label_spikes(1, 3, 4);
        assert_eq!(y.n_neurons, 3);
        assert_eq!(y.row(1), &[1, 1, 1, 1]);
        assert_eq!(y.row(0), &[0, 0, 0, 0]);
        let mut cfg = ExperimentConfig::new(ExperimentId::DigitsGan);
        assert_eq!(digit_classes(&cfg), vec![0, 1]);
        cfg.all_classes = true;
        assert_eq!(digit_classes(&cfg).len(), 10);
    }

    #[test]
    fn rate_features_recover_strong_pixels() {
        let img = LabeledImage { pixels: vec![1.0; IMAGE_PIXELS], label: 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, _) = encode_digit(&img, 0, 2, 8, &mut rng).unwrap();
        let f = decoded_features(&x, DecodeMode::Rate, 2.0).unwrap();
        assert!(f.iter().all(|&v| v == 1.0));
        let ts = decoded_features(&x, DecodeMode::TimeSurface, 2.0).unwrap();
        assert!(ts.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn resume_from_checkpoint_reproduces_uninterrupted_run() {
        // 6 plain steps vs 3 steps + checkpoint + 3 more from the restore
        let topo = SnnTopology::layered(1, 0, 1).unwrap();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut seed_rng = ChaCha8Rng::seed_from_u64(31);
        let gen0 = SnnParams::init(&topo, basis.clone(), basis, &mut seed_rng);
        let disc0 = AnnParams::new(vec![
            Layer::Flatten,
            Layer::dense(8, 1, Activation::Sigmoid, &mut seed_rng),
        ]);
        let pool: Vec<(SpikeTrain, SpikeTrain)> = (0..6)
            .map(|i| {
                let mut x = SpikeTrain::zeros(1, 4);
                x.set(0, i % 4, true);
                (x, SpikeTrain::ones(1, 4))
            })
            .collect();
        let tc = TrainConfig {
            mu_disc: 0.05,
            mu_gen: 0.05,
            batch: 4,
            t: 4,
            gen_loss: GanMode::Saturating,
            svgd_eta: 0.01,
            iterations: 6,
            seed: 0,
        };
        let run_steps = |gen: &mut SnnParams,
                         disc: &mut AnnParams,
                         rng: &mut ChaCha8Rng,
                         n: usize| {
            for _ in 0..n {
                let batch = clone_batch(&pool, 4, rng);
                spikegan_step(gen, disc, &topo, &batch, DiscEncoding::Spikes, &tc, rng).unwrap();
            }
        };
        let mut g1 = gen0.clone();
        let mut d1 = disc0.clone();
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        run_steps(&mut g1, &mut d1, &mut r1, 6);

        let mut g2 = gen0.clone();
        let mut d2 = disc0.clone();
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        run_steps(&mut g2, &mut d2, &mut r2, 3);
        let dir = tempdir().unwrap();
        let path = dir.path().join("mid.bin");
        Checkpoint::capture(3, &[&g2], &d2, &r2).save(&path).unwrap();

        let ck = Checkpoint::load(&path).unwrap();
        let mut g3 = gen0.clone();
        g3.set_flat(&ck.gen_flats[0]).unwrap();
        let mut d3 = disc0.clone();
        d3.set_flat(&ck.disc_flat).unwrap();
        let mut r3 = ck.restore_rng();
        run_steps(&mut g3, &mut d3, &mut r3, 3);
        assert_eq!(g1.to_flat(), g3.to_flat());
        assert_eq!(d1.to_flat(), d3.to_flat());
    }
}
