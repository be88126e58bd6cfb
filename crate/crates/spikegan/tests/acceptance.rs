//! End-to-end acceptance checks. Every test prints one `ACCEPTANCE n ...
//! PASS/FAIL` line (run with `--nocapture` to see the lines for passing
//! tests). All tolerances are pinned here, next to the checks they govern.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikegan::codec::{exp_basis, raised_cosine_basis};
use spikegan::config::{ExperimentConfig, ExperimentId, Preset};
use spikegan::datasets::{load_digits, make_burst_tonic, make_task, step_input, Rotation};
use spikegan::eval::{accuracy, mode_coverage, train_classifier, tstr};
use spikegan::experiment::{
    build_discriminator, digit_classes, disc_encoding, encode_digit, gradcheck,
    heldout_task_trts, random_pair_task, resolve_digits_path, rng_stream,
    sample_synthetic_features, split_digits, train_config, Checkpoint,
};
use spikegan::meta::{run_continual, ContinualSchedule, HyperParams};
use spikegan::snn::{
    forward_sample, EpisodeRunner, SnnGrads, SnnParams, SnnTopology, SpikeTrain,
};
use spikegan::tensor::{forward, Activation, AnnParams, GanMode, Layer};
use spikegan::training::{
    bayes_spikegan_step, ml_train_step, spikegan_step, svgd_kernel, DiscEncoding, ParticleSet,
    TrainConfig,
};

fn verdict(n: usize, name: &str, pass: bool) {
    println!("ACCEPTANCE {} {}: {}", n, name, if pass { "PASS" } else { "FAIL" });
    assert!(pass, "acceptance criterion {} ({}) failed", n, name);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_gradient_correctness() {
    let results = gradcheck(0);
    let pass = results.len() == 3 && results.iter().all(|r| r.ok && r.max_rel_err < 1e-5);
    for r in &results {
        println!("  gradcheck {} max rel err {:.3e}", r.name, r.max_rel_err);
    }
    verdict(1, "gradient correctness", pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_2_reinforce_unbiasedness() {
    // 1 read-out neuron, T = 2, fixed discriminator; compare the Monte Carlo
    // REINFORCE estimate against the exhaustively enumerated gradient.
    let t = 2;
    let topo = SnnTopology::layered(1, 0, 1).unwrap();
    let basis = exp_basis(2, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
    let disc = AnnParams::new(vec![
        Layer::Flatten,
        Layer::dense(2 * t, 1, Activation::Sigmoid, &mut rng),
    ]);
    let y = step_input(t);
    let n_params = gen.n_params();

    // reward and per-sequence gradient for one fixed read-out sequence
    let eval_sequence = |bits: [bool; 2]| -> (f64, f64, Vec<f64>) {
        let mut x = SpikeTrain::zeros(1, t);
        for (tau, &b) in bits.iter().enumerate() {
            x.set(0, tau, b);
        }
        let mut runner = EpisodeRunner::new(&gen, &topo, &y).unwrap();
        let mut grads = SnnGrads::zeros_like(&gen);
        let mut q = 1.0;
        for tau in 0..t {
            let u = runner.potentials();
            let p = 1.0 / (1.0 + (-u[0]).exp());
            q *= if bits[tau] { p } else { 1.0 - p };
            runner.accumulate_grads(&[bits[tau]], &u, |_| 1.0, &mut grads);
            runner.advance(&[bits[tau]]);
        }
        let input = DiscEncoding::Spikes.build_input(&x, &y).unwrap();
        let (out, _) = forward(&disc, &input).unwrap();
        let r = (1.0 - out.data[0]).ln();
        (q, r, grads.to_flat())
    };

    let mut exact = vec![0.0; n_params];
    for bits in [[false, false], [false, true], [true, false], [true, true]] {
        let (q, r, g) = eval_sequence(bits);
        for (e, gi) in exact.iter_mut().zip(&g) {
            *e += q * r * gi;
        }
    }

    // Monte Carlo: 10^5 episodes, per-coordinate mean and standard error
    let n = 100_000usize;
    let mut mean = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    for i in 0..n {
        let trace = forward_sample(&gen, &topo, &y, &mut rng).unwrap();
        let x = trace.readout_train(&topo);
        let input = DiscEncoding::Spikes.build_input(&x, &y).unwrap();
        let (out, _) = forward(&disc, &input).unwrap();
        let r = (1.0 - out.data[0]).ln();
        let g = trace.grads.to_flat();
        for d in 0..n_params {
            let sample = r * g[d];
            let delta = sample - mean[d];
            mean[d] += delta / (i + 1) as f64;
            m2[d] += delta * (sample - mean[d]);
        }
    }
    let mut pass = true;
    for d in 0..n_params {
        let se = (m2[d] / (n as f64 - 1.0) / n as f64).sqrt();
        let dev = (mean[d] - exact[d]).abs();
        println!("  coord {}: exact {:+.5} mc {:+.5} (3 se = {:.5})", d, exact[d], mean[d], 3.0 * se);
        pass &= dev <= 3.0 * se;
    }
    verdict(2, "REINFORCE unbiasedness", pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_3_svgd_degeneracies() {
    let mut pass = true;

    // kernel identities at zero displacement
    let a = vec![0.3, -1.2, 0.7];
    let (kappa, grad) = svgd_kernel(&a, &a);
    pass &= kappa == 1.0 && grad.iter().all(|&g| g == 0.0);

    // analytic kernel gradient vs central finite differences
    let b = vec![0.1, -0.9, 1.4];
    let (_, grad_b) = svgd_kernel(&a, &b);
    let step = 1e-6;
    for d in 0..b.len() {
        let mut up = b.clone();
        up[d] += step;
        let mut down = b.clone();
        down[d] -= step;
        let fd = (svgd_kernel(&a, &up).0 - svgd_kernel(&a, &down).0) / (2.0 * step);
        let rel = (fd - grad_b[d]).abs() / fd.abs().max(grad_b[d].abs());
        pass &= rel < 1e-6;
    }

    // J = 1 with a constant prior equals the plain step bit-exactly
    let t = 20;
    let topo = SnnTopology::layered(1, 0, 1).unwrap();
    let basis = exp_basis(4, 2.0).unwrap();
    let mut init_rng = ChaCha8Rng::seed_from_u64(5);
    let gen0 = SnnParams::init(&topo, basis.clone(), basis.clone(), &mut init_rng);
    let disc0 = AnnParams::new(vec![
        Layer::Flatten,
        Layer::dense(2 * t, 1, Activation::Sigmoid, &mut init_rng),
    ]);
    let pool: Vec<(SpikeTrain, SpikeTrain)> = make_burst_tonic(40, t, &mut init_rng)
        .unwrap()
        .into_iter()
        .map(|e| (e.x, step_input(t)))
        .collect();
    let cfg = TrainConfig {
        mu_disc: 1e-2,
        mu_gen: 3e-2,
        batch: 10,
        t,
        gen_loss: GanMode::NonSaturating,
        svgd_eta: 3e-2, // equals mu_gen so the updates are comparable
        iterations: 5,
        seed: 0,
    };
    let mut plain_gen = gen0.clone();
    let mut plain_disc = disc0.clone();
    let mut rng_a = ChaCha8Rng::seed_from_u64(99);
    let mut particles = ParticleSet {
        particles: vec![gen0.clone()],
    };
    let mut bayes_disc = disc0.clone();
    let mut rng_b = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..5 {
        let batch: Vec<_> = pool[..10].to_vec();
        spikegan_step(
            &mut plain_gen,
            &mut plain_disc,
            &topo,
            &batch,
            DiscEncoding::Spikes,
            &cfg,
            &mut rng_a,
        )
        .unwrap();
        bayes_spikegan_step(
            &mut particles,
            &mut bayes_disc,
            &topo,
            &batch,
            DiscEncoding::Spikes,
            &cfg,
            &mut rng_b,
        )
        .unwrap();
    }
    pass &= plain_gen.to_flat() == particles.particles[0].to_flat();
    pass &= plain_disc.to_flat() == bayes_disc.to_flat();

    verdict(3, "SVGD degeneracies", pass);
}

// ---------------------------------------------------------------------------

/// Settings for the burst/tonic mode-coverage comparison. Pinned from
/// calibration runs; the whole pipeline is deterministic in the seed.
struct TemporalSetup {
    t: usize,
    tau_w: usize,
    basis_k: usize,
    j: usize,
    iterations: usize,
}

const CRIT4: TemporalSetup = TemporalSetup { t: 50, tau_w: 30, basis_k: 8, j: 5, iterations: 10_000 };

fn crit4_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentId::TemporalBayes).with_preset(Preset::Desk);
    cfg.seed = seed;
    cfg.t = CRIT4.t;
    cfg.tau_w = CRIT4.tau_w;
    cfg.basis_k = CRIT4.basis_k;
    cfg.particles = CRIT4.j;
    cfg.iterations = CRIT4.iterations;
    cfg.mu_disc = 1e-2;
    cfg.mu_gen = 1e-2;
    cfg.svgd_eta = 1e-2;
    cfg
}

fn coverage_of(
    gen: &SnnParams,
    topo: &SnnTopology,
    t: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let y = step_input(t);
    let samples: Vec<SpikeTrain> = (0..100)
        .map(|_| forward_sample(gen, topo, &y, rng).unwrap().readout_train(topo))
        .collect();
    let cov = mode_coverage(&samples).unwrap();
    (cov.burst_fraction, cov.tonic_fraction)
}

#[test]
fn criterion_4_temporal_mode_coverage() {
    const COVER: f64 = 0.7; // per-particle assignment fraction that counts as covering a mode
    let mut bayes_dual = 0;
    let mut ml_dual = 0;
    for seed in 0..5u64 {
        let cfg = crit4_config(seed);
        let topo = SnnTopology::layered(1, 0, 1).unwrap();
        let basis = raised_cosine_basis(cfg.tau_w, cfg.basis_k).unwrap();
        let mut rng = rng_stream(seed, 2);
        let mut data_rng = rng_stream(seed, 1);
        let pool: Vec<(SpikeTrain, SpikeTrain)> = make_burst_tonic(200, cfg.t, &mut data_rng)
            .unwrap()
            .into_iter()
            .map(|e| (e.x, step_input(cfg.t)))
            .collect();
        let mut particles =
            ParticleSet::init(&topo, basis.clone(), basis.clone(), cfg.particles, &mut rng)
                .unwrap();
        let mut disc = build_discriminator(&cfg, 2, 2, &mut rng).unwrap();
        let tc = train_config(&cfg);
        let enc = disc_encoding(&cfg);
        for _ in 0..cfg.iterations {
            let batch: Vec<_> =
                (0..tc.batch).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
            bayes_spikegan_step(&mut particles, &mut disc, &topo, &batch, enc, &tc, &mut rng)
                .unwrap();
        }
        let mut eval_rng = rng_stream(seed, 3);
        let mut best_burst = 0.0f64;
        let mut best_tonic = 0.0f64;
        for p in &particles.particles {
            let (b, t) = coverage_of(p, &topo, cfg.t, &mut eval_rng);
            best_burst = best_burst.max(b);
            best_tonic = best_tonic.max(t);
        }
        let dual = best_burst >= COVER && best_tonic >= COVER;
        bayes_dual += dual as usize;
        println!(
            "  seed {}: best burst {:.2} best tonic {:.2} dual={}",
            seed, best_burst, best_tonic, dual
        );

        // maximum-likelihood baseline under the same budget: one generator,
        // so a single sample set must cover both modes at 70% each
        let mut ml_gen = SnnParams::init(&topo, basis.clone(), basis.clone(), &mut rng);
        for _ in 0..cfg.iterations {
            let batch: Vec<_> =
                (0..tc.batch).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
            ml_train_step(&mut ml_gen, &topo, &batch, &tc, &mut rng).unwrap();
        }
        let (b, t) = coverage_of(&ml_gen, &topo, cfg.t, &mut eval_rng);
        let ml_has_dual = b >= COVER && t >= COVER;
        ml_dual += ml_has_dual as usize;
        println!("  seed {}: ml burst {:.2} tonic {:.2} dual={}", seed, b, t, ml_has_dual);
    }
    println!("  bayes dual coverage {}/5, ml dual coverage {}/5", bayes_dual, ml_dual);
    verdict(4, "temporal mode coverage", bayes_dual >= 3 && (5 - ml_dual) >= 4);
}

// ---------------------------------------------------------------------------

fn digit_features(
    images: &[spikegan::datasets::LabeledImage],
    classes: &[usize],
) -> Vec<(Vec<f64>, usize)> {
    images
        .iter()
        .filter_map(|img| {
            classes.iter().position(|&l| l == img.label).map(|c| (img.pixels.clone(), c))
        })
        .collect()
}

fn classifier_pair(
    cfg: &ExperimentConfig,
    n_classes: usize,
) -> (spikegan::eval::ClassifierSpec, spikegan::eval::ClassifierCfg) {
    (
        spikegan::eval::ClassifierSpec { in_dim: 64, hidden: vec![100, 100], n_classes },
        spikegan::eval::ClassifierCfg { steps: cfg.clf_steps, lr: cfg.clf_lr, batch: cfg.clf_batch },
    )
}

/// Train one conditional digit generator with the desk recipe and return it.
fn train_digit_gan(
    cfg: &ExperimentConfig,
    pool: &[(SpikeTrain, SpikeTrain)],
    nc: usize,
    rng: &mut ChaCha8Rng,
) -> (SnnParams, SnnTopology) {
    let topo = SnnTopology::layered(nc, cfg.hidden, 64).unwrap();
    let basis = exp_basis(cfg.tau_w, cfg.tau_f).unwrap();
    let mut gen = SnnParams::init(&topo, basis.clone(), basis, rng);
    let mut disc = build_discriminator(cfg, 64 + nc, 64 + nc, rng).unwrap();
    let tc = train_config(cfg);
    let enc = disc_encoding(cfg);
    for _ in 0..cfg.iterations {
        let batch: Vec<_> =
            (0..tc.batch).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
        spikegan_step(&mut gen, &mut disc, &topo, &batch, enc, &tc, rng).unwrap();
    }
    (gen, topo)
}

#[test]
fn criterion_5_digits_tstr() {
    const MARGIN: f64 = 0.10; // TSTR may trail the real-data baseline by at most this
    let mut passes = 0;
    for seed in 0..5u64 {
        let mut cfg = ExperimentConfig::new(ExperimentId::DigitsGan).with_preset(Preset::Desk);
        cfg.seed = seed;
        let images = load_digits(&resolve_digits_path(&cfg).unwrap()).unwrap();
        let (train_imgs, test_imgs) = split_digits(images);
        let classes = digit_classes(&cfg);
        let nc = classes.len();
        let mut data_rng = rng_stream(seed, 1);
        let mut pool = Vec::new();
        for img in &train_imgs {
            if let Some(c) = classes.iter().position(|&l| l == img.label) {
                pool.push(encode_digit(img, c, nc, cfg.t, &mut data_rng).unwrap());
            }
        }
        let mut rng = rng_stream(seed, 2);
        let (gen, topo) = train_digit_gan(&cfg, &pool, nc, &mut rng);

        let (spec, ccfg) = classifier_pair(&cfg, nc);
        let real_train = digit_features(&train_imgs, &classes);
        let real_test = digit_features(&test_imgs, &classes);
        let mut eval_rng = rng_stream(seed, 3);
        let clf = train_classifier(&spec, &real_train, &ccfg, &mut eval_rng).unwrap();
        let baseline = accuracy(&clf, &real_test).unwrap();
        let synth = sample_synthetic_features(
            &gen, &topo, nc, cfg.eval_samples, cfg.t, cfg.decode, cfg.tau_s, &mut eval_rng,
        )
        .unwrap();
        let t = tstr(&synth, &real_test, &spec, &ccfg, &mut eval_rng).unwrap();
        let ok = t >= baseline - MARGIN;
        passes += ok as usize;
        println!("  seed {}: baseline {:.3} tstr {:.3} ok={}", seed, baseline, t, ok);
    }
    verdict(5, "digits TSTR", passes >= 3);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_6_noise_robustness() {
    // "non-increasing" tolerates ties up to TREND_TOL to absorb the
    // granularity of a small evaluation set
    const TREND_TOL: f64 = 0.02;
    const BASELINE_MARGIN: f64 = 0.20;
    let fractions = [0.0, 0.1, 0.5];
    let mut passes = 0;
    for seed in 0..5u64 {
        let mut cfg = ExperimentConfig::new(ExperimentId::DigitsNoise).with_preset(Preset::Desk);
        cfg.seed = seed;
        let images = load_digits(&resolve_digits_path(&cfg).unwrap()).unwrap();
        let (train_imgs, test_imgs) = split_digits(images);
        let classes = digit_classes(&cfg);
        let nc = classes.len();
        let (spec, ccfg) = classifier_pair(&cfg, nc);
        let mut ok = true;
        let mut prev = f64::INFINITY;
        let mut line = format!("  seed {}:", seed);
        for (fi, &fraction) in fractions.iter().enumerate() {
            let mut data_rng = rng_stream(seed, 1 + 10 * fi as u64);
            let noisy_train: Vec<_> = train_imgs
                .iter()
                .map(|i| spikegan::datasets::corrupt(i, fraction, &mut data_rng).unwrap())
                .collect();
            let noisy_test: Vec<_> = test_imgs
                .iter()
                .map(|i| spikegan::datasets::corrupt(i, fraction, &mut data_rng).unwrap())
                .collect();
            let mut pool = Vec::new();
            for img in &noisy_train {
                if let Some(c) = classes.iter().position(|&l| l == img.label) {
                    pool.push(encode_digit(img, c, nc, cfg.t, &mut data_rng).unwrap());
                }
            }
            let mut rng = rng_stream(seed, 2 + 10 * fi as u64);
            let (gen, topo) = train_digit_gan(&cfg, &pool, nc, &mut rng);
            let mut eval_rng = rng_stream(seed, 3 + 10 * fi as u64);
            let clf = train_classifier(&spec, &digit_features(&noisy_train, &classes), &ccfg, &mut eval_rng)
                .unwrap();
            let baseline = accuracy(&clf, &digit_features(&noisy_test, &classes)).unwrap();
            let synth = sample_synthetic_features(
                &gen, &topo, nc, cfg.eval_samples, cfg.t, cfg.decode, cfg.tau_s, &mut eval_rng,
            )
            .unwrap();
            let trts_acc = accuracy(&clf, &synth).unwrap();
            line.push_str(&format!(" f={} trts {:.3} base {:.3};", fraction, trts_acc, baseline));
            ok &= trts_acc <= prev + TREND_TOL && trts_acc >= baseline - BASELINE_MARGIN;
            prev = trts_acc;
        }
        passes += ok as usize;
        println!("{} ok={}", line, ok);
    }
    verdict(6, "noise robustness trend", passes >= 3);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_7_meta_learning_benefit() {
    const GAP: f64 = 0.10;
    const META_STEPS: usize = 300;
    // One adaptation round on the held-out task is one within-task update:
    // k_steps (10) generator/discriminator steps on a fresh batch.
    const ADAPT_ROUNDS: usize = 200;
    let seed = 0u64;
    let mut cfg = ExperimentConfig::new(ExperimentId::MetaContinual).with_preset(Preset::Desk);
    cfg.seed = seed;
    cfg.tasks = META_STEPS;
    cfg.mu_meta = 0.5;
    let images = load_digits(&resolve_digits_path(&cfg).unwrap()).unwrap();
    let (train_imgs, _) = split_digits(images);
    let topo = SnnTopology::layered(2, cfg.hidden, 64).unwrap();
    let basis = exp_basis(cfg.tau_w, cfg.tau_f).unwrap();
    let mut rng = rng_stream(seed, 2);
    let gen0 = SnnParams::init(&topo, basis.clone(), basis.clone(), &mut rng);
    let disc0 = build_discriminator(&cfg, 64 + 2, 64 + 2, &mut rng).unwrap();
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
    let tc = train_config(&cfg);
    let enc = disc_encoding(&cfg);
    let t = cfg.t;
    let (snapshots, _) = run_continual(
        hp0.clone(),
        &topo,
        enc,
        |_ti, r: &mut ChaCha8Rng| {
            let (id, imgs) = random_pair_task(&train_imgs, r)?;
            let ex: Vec<_> = imgs
                .iter()
                .map(|img| encode_digit(img, img.label, 2, t, r))
                .collect::<spikegan::Result<_>>()?;
            Ok((id, ex))
        },
        |_, _, _, _| Ok(None),
        &schedule,
        &tc,
        &mut rng,
    )
    .unwrap();
    let meta_hp = snapshots.last().unwrap().clone();

    let adapt_steps = ADAPT_ROUNDS * cfg.k_steps;
    let mut gap_sum = 0.0;
    for (a, b) in [(7usize, 8usize), (7, 9), (8, 9)] {
        let task = make_task(a, b, Rotation::R0, &train_imgs).unwrap();
        let mut r1 = rng_stream(seed, 7000 + (a * 10 + b) as u64);
        let meta_acc = heldout_task_trts(&meta_hp, &topo, &task, &cfg, adapt_steps, &mut r1).unwrap();
        let mut r2 = rng_stream(seed, 8000 + (a * 10 + b) as u64);
        let rand_acc = heldout_task_trts(&hp0, &topo, &task, &cfg, adapt_steps, &mut r2).unwrap();
        println!("  pair ({},{}): meta {:.3} random {:.3}", a, b, meta_acc, rand_acc);
        gap_sum += meta_acc - rand_acc;
    }
    let mean_gap = gap_sum / 3.0;
    println!("  mean gap {:.3}", mean_gap);
    verdict(7, "meta-learning benefit", mean_gap >= GAP);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_8_tstr_ordering() {
    // ties tolerate TIE_TOL; the likelihood baseline must trail by GAP
    const TIE_TOL: f64 = 0.02;
    const GAP: f64 = 0.15;
    let mut cfg = ExperimentConfig::new(ExperimentId::NeuromorphicGan).with_preset(Preset::Desk);
    cfg.seed = 0;
    cfg.out_dir = std::env::temp_dir().join("spikegan_acceptance_crit8");
    let _ = std::fs::remove_dir_all(&cfg.out_dir);
    spikegan::experiment::run(&cfg).unwrap();
    let text = std::fs::read_to_string(cfg.out_dir.join("metrics.csv")).unwrap();
    let get = |name: &str| -> f64 {
        text.lines()
            .find(|l| l.split(',').nth(5) == Some(name))
            .and_then(|l| l.split(',').nth(6))
            .unwrap()
            .parse()
            .unwrap()
    };
    let real = get("tstr_real");
    let cnn = get("tstr_cnn");
    let decoder = get("tstr_decoder");
    let ml = get("tstr_ml");
    println!("  tstr: real {:.3} cnn {:.3} decoder {:.3} ml {:.3}", real, cnn, decoder, ml);
    let pass = real + TIE_TOL >= cnn && cnn + TIE_TOL >= decoder && decoder - GAP >= ml;
    verdict(8, "TSTR ordering", pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_9_determinism_and_round_trip() {
    let mut pass = true;

    // identical config + seed => byte-identical metrics.csv
    let base = std::env::temp_dir().join("spikegan_acceptance_crit9");
    let _ = std::fs::remove_dir_all(&base);
    let mut metrics = Vec::new();
    for run_idx in 0..2 {
        let mut cfg = ExperimentConfig::new(ExperimentId::TemporalGan).with_preset(Preset::Desk);
        cfg.seed = 42;
        cfg.iterations = 20;
        cfg.eval_every = 10;
        cfg.eval_samples = 25;
        cfg.out_dir = base.join(format!("run{}", run_idx));
        spikegan::experiment::run(&cfg).unwrap();
        metrics.push(std::fs::read(cfg.out_dir.join("metrics.csv")).unwrap());
    }
    pass &= !metrics[0].is_empty() && metrics[0] == metrics[1];

    // checkpoint round-trips bit-exactly mid-run and resumes identically
    let t = 20;
    let topo = SnnTopology::layered(1, 0, 1).unwrap();
    let basis = exp_basis(4, 2.0).unwrap();
    let mut init_rng = ChaCha8Rng::seed_from_u64(8);
    let gen0 = SnnParams::init(&topo, basis.clone(), basis, &mut init_rng);
    let disc0 = AnnParams::new(vec![
        Layer::Flatten,
        Layer::dense(2 * t, 1, Activation::Sigmoid, &mut init_rng),
    ]);
    let pool: Vec<(SpikeTrain, SpikeTrain)> = make_burst_tonic(40, t, &mut init_rng)
        .unwrap()
        .into_iter()
        .map(|e| (e.x, step_input(t)))
        .collect();
    let tc = TrainConfig {
        mu_disc: 1e-2,
        mu_gen: 1e-2,
        batch: 10,
        t,
        gen_loss: GanMode::Saturating,
        svgd_eta: 1e-2,
        iterations: 8,
        seed: 0,
    };
    let steps = |gen: &mut SnnParams, disc: &mut AnnParams, rng: &mut ChaCha8Rng, n: usize| {
        for _ in 0..n {
            let batch: Vec<_> =
                (0..10).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
            spikegan_step(gen, disc, &topo, &batch, DiscEncoding::Spikes, &tc, rng).unwrap();
        }
    };
    let (mut g_full, mut d_full) = (gen0.clone(), disc0.clone());
    let mut r = ChaCha8Rng::seed_from_u64(777);
    steps(&mut g_full, &mut d_full, &mut r, 8);

    let (mut g_half, mut d_half) = (gen0.clone(), disc0.clone());
    let mut r = ChaCha8Rng::seed_from_u64(777);
    steps(&mut g_half, &mut d_half, &mut r, 4);
    let ck_path = base.join("mid.bin");
    let ck = Checkpoint::capture(4, &[&g_half], &d_half, &r);
    ck.save(&ck_path).unwrap();
    let loaded = Checkpoint::load(&ck_path).unwrap();
    pass &= loaded == ck;
    let mut g_res = gen0.clone();
    g_res.set_flat(&loaded.gen_flats[0]).unwrap();
    let mut d_res = disc0.clone();
    d_res.set_flat(&loaded.disc_flat).unwrap();
    let mut r = loaded.restore_rng();
    steps(&mut g_res, &mut d_res, &mut r, 4);
    pass &= g_full.to_flat() == g_res.to_flat() && d_full.to_flat() == d_res.to_flat();

    verdict(9, "determinism and round trip", pass);
}
