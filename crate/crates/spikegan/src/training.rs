//! The learning procedures: the frequentist adversarial step, the Bayesian
//! particle-ensemble step driven by Stein variational gradient descent, and
//! the maximum-likelihood baseline with clamped read-out neurons.
//!
//! Generator updates are REINFORCE-style three-factor rules: a global reward
//! derived from the discriminator multiplies the episode's accumulated local
//! log-likelihood gradients. Generator and discriminator are always updated
//! from the same pre-step snapshot of each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{rate_decode, time_surface_decode};
use crate::error::{Error, Result};
use crate::snn::{forward_sample, EpisodeRunner, SnnGrads, SnnParams, SnnTopology, SpikeTrain};
use crate::tensor::{
    backward, clamp_prob, forward, gan_losses, sgd_step, AnnGrads, AnnParams, GanMode, Matrix,
    StepDirection,
};

/// How a (data, conditioning) spike-train pair becomes a discriminator input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscEncoding {
    /// rate-decode both signals, concatenate into one feature vector
    Rate,
    /// time-surface-decode the data signal, rate-decode the conditioning
    TimeSurface(f64),
    /// feed raw spikes, conditioning rows concatenated along the channel axis
    Spikes,
}

impl DiscEncoding {
    pub fn build_input(&self, x: &SpikeTrain, y: &SpikeTrain) -> Result<Matrix> {
        match *self {
            DiscEncoding::Rate => {
                let mut v = rate_decode(x);
                v.extend(rate_decode(y));
                Ok(Matrix::column(&v))
            }
            DiscEncoding::TimeSurface(tau_s) => {
                let mut v = time_surface_decode(x, tau_s)?;
                v.extend(rate_decode(y));
                Ok(Matrix::column(&v))
            }
            DiscEncoding::Spikes => {
                let stacked = x.vstack(y)?;
                let data: Vec<f64> = stacked.values().iter().map(|&b| b as f64).collect();
                Matrix::from_vec(stacked.n_neurons, stacked.t, data)
            }
        }
    }
}

/// Shared knobs for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// discriminator learning rate
    pub mu_disc: f64,
    /// generator learning rate
    pub mu_gen: f64,
    pub batch: usize,
    /// episode length
    pub t: usize,
    pub gen_loss: GanMode,
    /// SVGD step size
    pub svgd_eta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.t == 0 {
            return Err(Error::Usage("batch size and episode length must be positive".into()));
        }
        if self.mu_disc < 0.0 || self.mu_gen < 0.0 || self.svgd_eta < 0.0 {
            return Err(Error::Usage("learning rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Ensemble of generator parameter vectors approximating the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<SnnParams>,
}

impl ParticleSet {
    pub fn init(
        topology: &SnnTopology,
        basis_a: crate::codec::BasisMatrix,
        basis_b: crate::codec::BasisMatrix,
        j: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if j == 0 {
            return Err(Error::Usage("particle count must be at least 1".into()));
        }
        Ok(ParticleSet {
            particles: (0..j)
                .map(|_| SnnParams::init(topology, basis_a.clone(), basis_b.clone(), rng))
                .collect(),
        })
    }

    pub fn j(&self) -> usize {
        self.particles.len()
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone)]
pub struct GanStepMetrics {
    pub mean_d_real: f64,
    pub mean_d_synth: f64,
    pub disc_loss: f64,
    pub gen_loss: f64,
    pub rewards: Vec<f64>,
}

/// One batch of synthetic episodes with the reward-weighted REINFORCE
/// gradient estimate already reduced.
pub struct SynthBatch {
    pub samples: Vec<SpikeTrain>,
    pub disc_inputs: Vec<Matrix>,
    pub d_synth: Vec<f64>,
    pub rewards: Vec<f64>,
    /// (1/B) sum_i r_i g_i
    pub grad: SnnGrads,
}

fn episode_seeds(b: usize, rng: &mut impl Rng) -> Vec<u64> {
    (0..b).map(|_| rng.gen()).collect()
}

/// Sample `ys.len()` episodes, score them with the discriminator, and reduce
/// the reward-weighted generator gradient. Rewards follow `mode`:
/// `Saturating` gives `log(1 - D)`, `NonSaturating` gives `-log D`; both are
/// descent rewards for the generator objective.
pub fn generator_reinforce(
    gen: &SnnParams,
    topology: &SnnTopology,
    disc: &AnnParams,
    ys: &[&SpikeTrain],
    encoding: DiscEncoding,
    mode: GanMode,
    rng: &mut impl Rng,
) -> Result<SynthBatch> {
    let seeds = episode_seeds(ys.len(), rng);
    let episodes: Vec<_> = ys
        .par_iter()
        .zip(seeds)
        .map(|(y, seed)| {
            let mut ep_rng = ChaCha8Rng::seed_from_u64(seed);
            forward_sample(gen, topology, y, &mut ep_rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let b = ys.len();
    let mut samples = Vec::with_capacity(b);
    let mut disc_inputs = Vec::with_capacity(b);
    let mut d_synth = Vec::with_capacity(b);
    let mut rewards = Vec::with_capacity(b);
    let mut grad = SnnGrads::zeros_like(gen);
    for (trace, y) in episodes.iter().zip(ys) {
        let x = trace.readout_train(topology);
        let input = encoding.build_input(&x, y)?;
        let (out, _) = forward(disc, &input)?;
        let d = clamp_prob(out.data[0]);
        let r = match mode {
            GanMode::Saturating => (1.0 - d).ln(),
            GanMode::NonSaturating => -d.ln(),
        };
        if !r.is_finite() {
            return Err(Error::Numeric(format!("non-finite reward {}", r)));
        }
        grad.add_scaled(r / b as f64, &trace.grads);
        samples.push(x);
        disc_inputs.push(input);
        d_synth.push(d);
        rewards.push(r);
    }
    Ok(SynthBatch { samples, disc_inputs, d_synth, rewards, grad })
}

/// Discriminator gradient of `log D(input)` (real term) or `log(1 - D(input))`
/// (synthetic term), scaled by `weight`.
fn disc_loglik_grad(
    disc: &AnnParams,
    input: &Matrix,
    real: bool,
    weight: f64,
    acc: &mut AnnGrads,
) -> Result<f64> {
    let (out, mut tape) = forward(disc, input)?;
    let d = clamp_prob(out.data[0]);
    // d log D / dD = 1/D ; d log(1-D) / dD = -1/(1-D)
    let g = if real { weight / d } else { -weight / (1.0 - d) };
    let grads = backward(disc, &mut tape, &Matrix::column(&[g]))?;
    acc.add_assign(&grads);
    Ok(d)
}

/// One frequentist adversarial step: sample a synthetic batch with cached
/// gradients, ascend the discriminator on the batch objective, descend the
/// generator along the reward-weighted REINFORCE estimate. Both updates use
/// the pre-step parameters of the other network.
pub fn spikegan_step(
    gen: &mut SnnParams,
    disc: &mut AnnParams,
    topology: &SnnTopology,
    real_batch: &[(SpikeTrain, SpikeTrain)],
    encoding: DiscEncoding,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<GanStepMetrics> {
    cfg.validate()?;
    if real_batch.len() < cfg.batch {
        return Err(Error::Usage(format!(
            "batch holds {} examples, config requires {}",
            real_batch.len(),
            cfg.batch
        )));
    }
    let batch = &real_batch[..cfg.batch];
    let b = batch.len();
    let ys: Vec<&SpikeTrain> = batch.iter().map(|(_, y)| y).collect();
    let synth = generator_reinforce(gen, topology, disc, &ys, encoding, cfg.gen_loss, rng)?;

    // discriminator ascent on (1/B) sum [log D(real) + log(1 - D(synth))]
    let mut disc_grads = AnnGrads::zeros_like(disc);
    let mut d_reals = Vec::with_capacity(b);
    for (x, y) in batch {
        let input = encoding.build_input(x, y)?;
        d_reals.push(disc_loglik_grad(disc, &input, true, 1.0 / b as f64, &mut disc_grads)?);
    }
    for input in &synth.disc_inputs {
        disc_loglik_grad(disc, input, false, 1.0 / b as f64, &mut disc_grads)?;
    }

    let mut disc_loss = 0.0;
    let mut gen_loss = 0.0;
    for (dr, ds) in d_reals.iter().zip(&synth.d_synth) {
        let (dl, gl) = gan_losses(*dr, *ds, cfg.gen_loss);
        disc_loss += dl / b as f64;
        gen_loss += gl / b as f64;
    }
    if !disc_loss.is_finite() || !gen_loss.is_finite() {
        return Err(Error::Numeric("non-finite adversarial loss".into()));
    }

    sgd_step(disc, &disc_grads, cfg.mu_disc, StepDirection::Ascent)?;
    if !synth.grad.is_finite() {
        return Err(Error::Numeric("non-finite generator gradient".into()));
    }
    gen.axpy(-cfg.mu_gen, &synth.grad);

    Ok(GanStepMetrics {
        mean_d_real: d_reals.iter().sum::<f64>() / b as f64,
        mean_d_synth: synth.d_synth.iter().sum::<f64>() / b as f64,
        disc_loss,
        gen_loss,
        rewards: synth.rewards,
    })
}

/// Gaussian SVGD kernel `exp(-||a - b||^2)` and its gradient with respect to
/// the second argument, `2 (a - b) kappa`.
pub fn svgd_kernel(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let kappa = (-sq).exp();
    let grad_b = a.iter().zip(b).map(|(x, y)| 2.0 * (x - y) * kappa).collect();
    (kappa, grad_b)
}

/// SVGD displacement for every particle from a common snapshot:
/// `delta_j = sum_j' [ kappa(phi_j, phi_j') * grad_j' - grad_{phi_j'} kappa(phi_j, phi_j') ]`
/// with a constant improper prior (its score term is zero). The returned
/// deltas are descent directions: apply `phi_j -= eta * delta_j`.
pub fn svgd_directions(flats: &[Vec<f64>], grads: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let j = flats.len();
    let dim = flats[0].len();
    (0..j)
        .map(|a| {
            let mut delta = vec![0.0; dim];
            for b in 0..j {
                let (kappa, grad_b_kappa) = svgd_kernel(&flats[a], &flats[b]);
                for d in 0..dim {
                    delta[d] += kappa * grads[b][d] - grad_b_kappa[d];
                }
            }
            delta
        })
        .collect()
}

/// One Bayesian adversarial step: per-particle REINFORCE gradients of
/// `E[-log D]`, a simultaneous SVGD update of all particles from a pre-step
/// snapshot, and one discriminator ascent step on the particle-averaged
/// batch objective.
pub fn bayes_spikegan_step(
    particles: &mut ParticleSet,
    disc: &mut AnnParams,
    topology: &SnnTopology,
    real_batch: &[(SpikeTrain, SpikeTrain)],
    encoding: DiscEncoding,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<GanStepMetrics> {
    cfg.validate()?;
    if real_batch.len() < cfg.batch {
        return Err(Error::Usage("batch shorter than configured size".into()));
    }
    let batch = &real_batch[..cfg.batch];
    let b = batch.len();
    let jn = particles.j();
    let dim = particles.particles[0].n_params();
    for p in &particles.particles {
        if p.n_params() != dim {
            return Err(Error::Usage("particle shape mismatch".into()));
        }
    }
    let ys: Vec<&SpikeTrain> = batch.iter().map(|(_, y)| y).collect();

    let mut flats = Vec::with_capacity(jn);
    let mut grads = Vec::with_capacity(jn);
    let mut synth_inputs = Vec::new();
    let mut d_synth_all = Vec::new();
    let mut rewards_all = Vec::new();
    for particle in &particles.particles {
        let synth = generator_reinforce(
            particle,
            topology,
            disc,
            &ys,
            encoding,
            GanMode::NonSaturating,
            rng,
        )?;
        flats.push(particle.to_flat());
        grads.push(synth.grad.to_flat());
        synth_inputs.extend(synth.disc_inputs);
        d_synth_all.extend(synth.d_synth);
        rewards_all.extend(synth.rewards);
    }

    // simultaneous particle update from the snapshot
    let deltas = svgd_directions(&flats, &grads);
    for ((particle, flat), delta) in particles.particles.iter_mut().zip(&flats).zip(&deltas) {
        let updated: Vec<f64> =
            flat.iter().zip(delta).map(|(p, d)| p - cfg.svgd_eta * d).collect();
        if updated.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite SVGD update".into()));
        }
        particle.set_flat(&updated)?;
    }

    // discriminator ascent on the J-averaged objective
    let mut disc_grads = AnnGrads::zeros_like(disc);
    let mut d_reals = Vec::with_capacity(b);
    for (x, y) in batch {
        let input = encoding.build_input(x, y)?;
        d_reals.push(disc_loglik_grad(disc, &input, true, 1.0 / b as f64, &mut disc_grads)?);
    }
    for input in &synth_inputs {
        disc_loglik_grad(disc, input, false, 1.0 / (jn * b) as f64, &mut disc_grads)?;
    }
    sgd_step(disc, &disc_grads, cfg.mu_disc, StepDirection::Ascent)?;

    let mean_d_real = d_reals.iter().sum::<f64>() / b as f64;
    let mean_d_synth = d_synth_all.iter().sum::<f64>() / d_synth_all.len() as f64;
    let (disc_loss, gen_loss) = gan_losses(mean_d_real, mean_d_synth, GanMode::NonSaturating);
    Ok(GanStepMetrics { mean_d_real, mean_d_synth, disc_loss, gen_loss, rewards: rewards_all })
}

/// Diagnostics for one maximum-likelihood step.
#[derive(Debug, Clone)]
pub struct MlStepMetrics {
    /// mean per-example log-likelihood of the clamped read-out spikes
    pub mean_log_likelihood: f64,
}

/// One maximum-likelihood ascent step with read-out neurons clamped to the
/// targets and hidden neurons sampled.
///
/// Read-out parameters follow their exact local log-likelihood gradients.
/// Hidden parameters follow a REINFORCE estimate: the score gradient of the
/// hidden spike at step `tau` is weighted by the learning signal accumulated
/// from `tau` onward, `sum_{tau' >= tau} l_{tau'}`, where
/// `l_tau = sum_{i in R} log[ (1-v) (1-sigma(u)) + v sigma(u) ]` is the
/// per-step log-probability of the clamped read-outs. Signals before the
/// spike carry no information about it and would only add variance.
pub fn ml_train_step(
    gen: &mut SnnParams,
    topology: &SnnTopology,
    target_batch: &[(SpikeTrain, SpikeTrain)],
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<MlStepMetrics> {
    cfg.validate()?;
    if target_batch.is_empty() {
        return Err(Error::Usage("empty target batch".into()));
    }
    let b = target_batch.len();
    let mut grad = SnnGrads::zeros_like(gen);
    let mut mean_ll = 0.0;
    let seeds = episode_seeds(b, rng);
    for ((x_target, y), seed) in target_batch.iter().zip(seeds) {
        if x_target.t != y.t {
            return Err(Error::Usage("target length does not match input length".into()));
        }
        if x_target.n_neurons != topology.readout.len() {
            return Err(Error::Usage("target rows do not match read-out count".into()));
        }
        let mut ep_rng = ChaCha8Rng::seed_from_u64(seed);
        let (ep_grad, ll) = clamped_episode_gradient(gen, topology, x_target, y, &mut ep_rng)?;
        grad.add_scaled(1.0 / b as f64, &ep_grad);
        mean_ll += ll / b as f64;
    }
    if !grad.is_finite() {
        return Err(Error::Numeric("non-finite maximum-likelihood gradient".into()));
    }
    gen.axpy(cfg.mu_gen, &grad);
    Ok(MlStepMetrics { mean_log_likelihood: mean_ll })
}

/// Run one clamped episode and build the combined gradient described in
/// [`ml_train_step`]. Returns the gradient and the clamped log-likelihood.
fn clamped_episode_gradient(
    gen: &SnnParams,
    topology: &SnnTopology,
    x_target: &SpikeTrain,
    y: &SpikeTrain,
    rng: &mut impl Rng,
) -> Result<(SnnGrads, f64)> {
    let t = y.t;
    let n = topology.n_neurons;
    let mut is_readout = vec![false; n];
    let mut readout_row = vec![usize::MAX; n];
    for (row, &id) in topology.readout.iter().enumerate() {
        is_readout[id] = true;
        readout_row[id] = row;
    }

    // pass 1: sample hidden spikes, record everything
    let mut runner = EpisodeRunner::new(gen, topology, y)?;
    let mut spikes: Vec<Vec<bool>> = Vec::with_capacity(t);
    let mut potentials: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut signal = vec![0.0; t];
    for tau in 0..t {
        let u = runner.potentials();
        let mut step = vec![false; n];
        let mut l_tau = 0.0;
        for &i in topology.evaluation_order() {
            let p = crate::snn::spike_probability(u[i]);
            if is_readout[i] {
                let v = x_target.get(readout_row[i], tau) as f64;
                step[i] = v == 1.0;
                l_tau += (v * p + (1.0 - v) * (1.0 - p)).max(f64::MIN_POSITIVE).ln();
            } else {
                step[i] = rng.gen::<f64>() < p;
            }
        }
        signal[tau] = l_tau;
        spikes.push(step);
        potentials.push(u);
        runner.advance(&spikes[tau]);
    }
    let ll: f64 = signal.iter().sum();

    // suffix sums of the learning signal: weight for hidden spikes at tau
    let mut suffix = vec![0.0; t];
    let mut acc = 0.0;
    for tau in (0..t).rev() {
        acc += signal[tau];
        suffix[tau] = acc;
    }

    // pass 2: replay, accumulating read-out grads at weight 1 and hidden
    // grads at the suffix-signal weight
    let mut replay = EpisodeRunner::new(gen, topology, y)?;
    let mut grads = SnnGrads::zeros_like(gen);
    for tau in 0..t {
        let u = replay.potentials();
        replay.accumulate_grads(
            &spikes[tau],
            &u,
            |i| if is_readout[i] { 1.0 } else { suffix[tau] },
            &mut grads,
        );
        replay.advance(&spikes[tau]);
    }
    debug_assert!(potentials[0].len() == n);
    Ok((grads, ll))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::exp_basis;
    use crate::snn::{log_likelihood, PreSource, Synapse};
    use crate::tensor::{Activation, Layer};
    use approx::assert_relative_eq;

    fn cfg(mu_disc: f64, mu_gen: f64, batch: usize, t: usize) -> TrainConfig {
        TrainConfig {
            mu_disc,
            mu_gen,
            batch,
            t,
            gen_loss: GanMode::Saturating,
            svgd_eta: 0.01,
            iterations: 1,
            seed: 0,
        }
    }

    fn single_neuron_topo() -> SnnTopology {
        SnnTopology::new(
            1,
            1,
            vec![0],
            vec![Synapse { source: PreSource::Input(0), target: 0 }],
            vec![true],
        )
        .unwrap()
    }

    // flatten first: raw-spike inputs arrive as channels x T matrices
    fn tiny_disc(in_dim: usize, seed: u64) -> AnnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AnnParams::new(vec![
            Layer::Flatten,
            Layer::dense(in_dim, 1, Activation::Sigmoid, &mut rng),
        ])
    }

    fn zero_disc(in_dim: usize) -> AnnParams {
        AnnParams::new(vec![
            Layer::Flatten,
            Layer::Dense {
                in_dim,
                out_dim: 1,
                weights: Matrix::zeros(1, in_dim),
                bias: vec![0.0],
                activation: Activation::Sigmoid,
            },
        ])
    }

    fn temporal_batch(t: usize, b: usize, seed: u64) -> Vec<(SpikeTrain, SpikeTrain)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..b)
            .map(|_| {
                let mut x = SpikeTrain::zeros(1, t);
                for tau in 0..t {
                    x.set(0, tau, rng.gen::<bool>());
                }
                (x, SpikeTrain::ones(1, t))
            })
            .collect()
    }

    #[test]
    fn zero_rates_leave_parameters_unchanged() {
        let topo = single_neuron_topo();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let mut disc = tiny_disc(8, 1);
        let gen0 = gen.clone();
        let disc0 = disc.clone();
        let batch = temporal_batch(4, 3, 2);
        let metrics = spikegan_step(
            &mut gen,
            &mut disc,
            &topo,
            &batch,
            DiscEncoding::Spikes,
            &cfg(0.0, 0.0, 3, 4),
            &mut rng,
        )
        .unwrap();
        assert_eq!(gen, gen0);
        assert_eq!(disc, disc0);
        assert!(metrics.disc_loss.is_finite());
    }

    #[test]
    fn short_batch_is_usage_error() {
        let topo = single_neuron_topo();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let mut disc = tiny_disc(8, 4);
        let batch = temporal_batch(4, 2, 5);
        assert!(matches!(
            spikegan_step(
                &mut gen,
                &mut disc,
                &topo,
                &batch,
                DiscEncoding::Spikes,
                &cfg(0.1, 0.1, 3, 4),
                &mut rng,
            ),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn constant_discriminator_gives_uniform_rewards() {
        let topo = single_neuron_topo();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let disc = zero_disc(8);
        let batch = temporal_batch(4, 4, 7);
        let ys: Vec<&SpikeTrain> = batch.iter().map(|(_, y)| y).collect();
        let mut rng2 = ChaCha8Rng::seed_from_u64(8);
        let synth = generator_reinforce(
            &gen,
            &topo,
            &disc,
            &ys,
            DiscEncoding::Spikes,
            GanMode::Saturating,
            &mut rng2,
        )
        .unwrap();
        let r = (1.0f64 - 0.5).ln();
        for reward in &synth.rewards {
            assert_relative_eq!(reward, &r, max_relative = 1e-12);
        }
        // uniform reward factors out: reduced grad = r * mean(g_i)
        let mut rng3 = ChaCha8Rng::seed_from_u64(8);
        let seeds: Vec<u64> = (0..4).map(|_| rng3.gen()).collect();
        let mut mean_g = SnnGrads::zeros_like(&gen);
        for (y, seed) in ys.iter().zip(seeds) {
            let mut ep_rng = ChaCha8Rng::seed_from_u64(seed);
            let trace = forward_sample(&gen, &topo, y, &mut ep_rng).unwrap();
            mean_g.add_scaled(0.25, &trace.grads);
        }
        mean_g.scale(r);
        for (a, b) in synth.grad.to_flat().iter().zip(mean_g.to_flat()) {
            assert_relative_eq!(a, &b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    /// Exhaustive-enumeration oracle for the generator objective
    /// `E_{x ~ p_phi}[psi2(D(x))]` on a 1-neuron, T=2 generator: enumerate
    /// all four output sequences, weight rewards by exact sequence
    /// probabilities, differentiate by central finite differences.
    fn enumeration_gradient(
        gen: &SnnParams,
        topo: &SnnTopology,
        disc: &AnnParams,
        y: &SpikeTrain,
        mode: GanMode,
        step: f64,
    ) -> Vec<f64> {
        let objective = |params: &SnnParams| -> f64 {
            let mut total = 0.0;
            for bits in 0..4u8 {
                let x = SpikeTrain::from_values(1, 2, &[bits & 1, (bits >> 1) & 1]).unwrap();
                let h = SpikeTrain::zeros(0, 2);
                let p = log_likelihood(params, topo, &x, &h, y).unwrap().exp();
                let input = DiscEncoding::Spikes.build_input(&x, y).unwrap();
                let (out, _) = forward(disc, &input).unwrap();
                let d = clamp_prob(out.data[0]);
                let r = match mode {
                    GanMode::Saturating => (1.0 - d).ln(),
                    GanMode::NonSaturating => -d.ln(),
                };
                total += p * r;
            }
            total
        };
        let flat = gen.to_flat();
        (0..flat.len())
            .map(|i| {
                let mut plus = gen.clone();
                let mut minus = gen.clone();
                let mut f = flat.clone();
                f[i] += step;
                plus.set_flat(&f).unwrap();
                f[i] -= 2.0 * step;
                minus.set_flat(&f).unwrap();
                (objective(&plus) - objective(&minus)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn reinforce_estimate_is_unbiased() {
        let topo = single_neuron_topo();
        let basis = exp_basis(2, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let disc = tiny_disc(4, 10);
        let y = SpikeTrain::ones(1, 2);
        let exact = enumeration_gradient(&gen, &topo, &disc, &y, GanMode::Saturating, 1e-5);

        let n = 100_000usize;
        let dim = gen.n_params();
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        let mut mc_rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..n {
            let trace = forward_sample(&gen, &topo, &y, &mut mc_rng).unwrap();
            let x = trace.readout_train(&topo);
            let input = DiscEncoding::Spikes.build_input(&x, &y).unwrap();
            let (out, _) = forward(&disc, &input).unwrap();
            let d = clamp_prob(out.data[0]);
            let r = (1.0 - d).ln();
            for (i, g) in trace.grads.to_flat().iter().enumerate() {
                let v = r * g;
                sum[i] += v;
                sum_sq[i] += v * v;
            }
        }
        for i in 0..dim {
            let mean = sum[i] / n as f64;
            let var = (sum_sq[i] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - exact[i]).abs() <= 3.0 * se + 1e-9,
                "coordinate {}: mc {} exact {} se {}",
                i,
                mean,
                exact[i],
                se
            );
        }
    }

    #[test]
    fn svgd_kernel_degeneracies() {
        let a = vec![0.3, -1.2, 0.7];
        let (kappa, grad) = svgd_kernel(&a, &a);
        assert_eq!(kappa, 1.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        // ||a-b||^2 = ln 2 -> kappa = 0.5
        let b = vec![0.3 + (2f64.ln()).sqrt(), -1.2, 0.7];
        let (kappa, _) = svgd_kernel(&a, &b);
        assert_relative_eq!(kappa, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn svgd_kernel_gradient_matches_finite_differences() {
        let a = vec![0.4, -0.2, 1.1, 0.05];
        let b = vec![-0.3, 0.6, 0.9, -0.8];
        let (_, grad) = svgd_kernel(&a, &b);
        let step = 1e-6;
        for i in 0..b.len() {
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp[i] += step;
            bm[i] -= step;
            let fd = (svgd_kernel(&a, &bp).0 - svgd_kernel(&a, &bm).0) / (2.0 * step);
            assert_relative_eq!(grad[i], fd, max_relative = 1e-6, epsilon = 1e-12);
        }
    }

    #[test]
    fn svgd_single_particle_reduces_to_plain_gradient() {
        let flats = vec![vec![0.5, -0.3, 0.9]];
        let grads = vec![vec![0.1, 0.2, -0.4]];
        let deltas = svgd_directions(&flats, &grads);
        assert_eq!(deltas[0], grads[0]);
    }

    #[test]
    fn svgd_identical_particles_get_identical_updates() {
        let flats = vec![vec![0.5, -0.3], vec![0.5, -0.3]];
        let grads = vec![vec![0.1, 0.2], vec![0.1, 0.2]];
        let deltas = svgd_directions(&flats, &grads);
        assert_eq!(deltas[0], deltas[1]);
    }

    #[test]
    fn svgd_zero_gradients_give_pure_repulsion() {
        let flats = vec![vec![0.5, 0.0], vec![-0.5, 0.0]];
        let grads = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let deltas = svgd_directions(&flats, &grads);
        // delta_1 = -grad_{phi2} kappa(phi1, phi2) = -2 (phi1 - phi2) kappa
        let (kappa, _) = svgd_kernel(&flats[0], &flats[1]);
        assert_relative_eq!(deltas[0][0], -2.0 * 1.0 * kappa, max_relative = 1e-12);
        // applying phi1 -= eta * delta pushes phi1 along +(phi1 - phi2): separation
        let updated = flats[0][0] - 0.1 * deltas[0][0];
        assert!(updated > flats[0][0]);
        // symmetric for the other particle
        assert_relative_eq!(deltas[1][0], 2.0 * 1.0 * kappa, max_relative = 1e-12);
    }

    #[test]
    fn bayes_step_with_one_particle_is_plain_gradient_step() {
        let topo = single_neuron_topo();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut particles =
            ParticleSet::init(&topo, basis.clone(), basis.clone(), 1, &mut rng).unwrap();
        let expect0 = particles.particles[0].clone();
        let mut disc = tiny_disc(8, 13);
        let disc_expect = disc.clone();
        let batch = temporal_batch(4, 3, 14);
        let mut c = cfg(0.0, 0.0, 3, 4);
        c.svgd_eta = 0.05;

        // manual plain step with the same rng stream
        let ys: Vec<&SpikeTrain> = batch.iter().map(|(_, y)| y).collect();
        let mut manual_rng = ChaCha8Rng::seed_from_u64(99);
        let synth = generator_reinforce(
            &expect0,
            &topo,
            &disc_expect,
            &ys,
            DiscEncoding::Spikes,
            GanMode::NonSaturating,
            &mut manual_rng,
        )
        .unwrap();
        let mut expected = expect0.clone();
        let flat: Vec<f64> = expect0
            .to_flat()
            .iter()
            .zip(synth.grad.to_flat())
            .map(|(p, g)| p - 0.05 * g)
            .collect();
        expected.set_flat(&flat).unwrap();

        let mut step_rng = ChaCha8Rng::seed_from_u64(99);
        bayes_spikegan_step(
            &mut particles,
            &mut disc,
            &topo,
            &batch,
            DiscEncoding::Spikes,
            &c,
            &mut step_rng,
        )
        .unwrap();
        // bit-exact equality
        assert_eq!(particles.particles[0].to_flat(), expected.to_flat());
    }

    #[test]
    fn ml_step_without_hidden_is_exact_likelihood_ascent() {
        let topo = single_neuron_topo();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let gen0 = gen.clone();
        let x = SpikeTrain::from_values(1, 5, &[1, 0, 1, 1, 0]).unwrap();
        let y = SpikeTrain::ones(1, 5);
        let h = SpikeTrain::zeros(0, 5);

        // finite-difference gradient of the exact log-likelihood
        let flat = gen0.to_flat();
        let step = 1e-6;
        let fd: Vec<f64> = (0..flat.len())
            .map(|i| {
                let mut plus = gen0.clone();
                let mut minus = gen0.clone();
                let mut f = flat.clone();
                f[i] += step;
                plus.set_flat(&f).unwrap();
                f[i] -= 2.0 * step;
                minus.set_flat(&f).unwrap();
                (log_likelihood(&plus, &topo, &x, &h, &y).unwrap()
                    - log_likelihood(&minus, &topo, &x, &h, &y).unwrap())
                    / (2.0 * step)
            })
            .collect();

        let mu = 0.1;
        let mut c = cfg(0.0, mu, 1, 5);
        c.gen_loss = GanMode::NonSaturating;
        ml_train_step(&mut gen, &topo, &[(x, y)], &c, &mut rng).unwrap();
        for ((after, before), g) in gen.to_flat().iter().zip(gen0.to_flat()).zip(&fd) {
            assert_relative_eq!(after - before, mu * g, max_relative = 1e-4, epsilon = 1e-10);
        }
    }

    #[test]
    fn learning_signal_is_nonpositive() {
        // l_tau is a log-probability of the clamped read-out spikes
        let topo = SnnTopology::layered(1, 1, 1).unwrap();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let x = SpikeTrain::from_values(1, 4, &[1, 0, 0, 1]).unwrap();
        let y = SpikeTrain::ones(1, 4);
        let (_, ll) = clamped_episode_gradient(&gen, &topo, &x, &y, &mut rng).unwrap();
        assert!(ll <= 0.0);
    }

    /// Enumeration oracle for the hidden-neuron estimator: the update targets
    /// the expected clamped log-likelihood
    /// `F(phi) = sum_h q_phi(h) log p_phi(x | h)`, computable exactly for a
    /// 1-visible + 1-hidden network at T=2 by enumerating hidden sequences.
    #[test]
    fn ml_hidden_gradient_matches_enumeration() {
        let topo = SnnTopology::layered(1, 1, 1).unwrap();
        let basis = exp_basis(2, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gen = SnnParams::init(&topo, basis.clone(), basis.clone(), &mut rng);
        let x = SpikeTrain::from_values(1, 2, &[1, 0]).unwrap();
        let y = SpikeTrain::ones(1, 2);

        // exact objective by enumerating the 4 hidden sequences
        let objective = |params: &SnnParams| -> f64 {
            let mut total = 0.0;
            for bits in 0..4u8 {
                let h = SpikeTrain::from_values(1, 2, &[bits & 1, (bits >> 1) & 1]).unwrap();
                // joint = q(h) * p(x|h); log_likelihood gives log joint
                let log_joint = log_likelihood(params, &topo, &x, &h, &y).unwrap();
                // q(h) alone: likelihood of hidden spikes under the same dynamics
                let log_q = {
                    // recompute by summing only hidden-neuron terms
                    let full_ll = log_joint;
                    // p(x|h) = joint / q(h); compute log p(x|h) directly below
                    let _ = full_ll;
                    hidden_log_prob(params, &topo, &x, &h, &y)
                };
                let log_px_given_h = log_joint - log_q;
                total += log_q.exp() * log_px_given_h;
            }
            total
        };

        // hidden-sequence log-probability under clamped dynamics
        fn hidden_log_prob(
            params: &SnnParams,
            topo: &SnnTopology,
            x: &SpikeTrain,
            h: &SpikeTrain,
            y: &SpikeTrain,
        ) -> f64 {
            let mut runner = EpisodeRunner::new(params, topo, y).unwrap();
            let hidden_ids = topo.hidden();
            let mut ll = 0.0;
            for tau in 0..y.t {
                let u = runner.potentials();
                let mut step = vec![false; topo.n_neurons];
                for (row, &id) in topo.readout.iter().enumerate() {
                    step[id] = x.get(row, tau) == 1;
                }
                for (row, &id) in hidden_ids.iter().enumerate() {
                    let s = h.get(row, tau);
                    step[id] = s == 1;
                    let p = crate::snn::spike_probability(u[id]);
                    ll += if s == 1 { p.ln() } else { (1.0 - p).ln() };
                }
                runner.advance(&step);
            }
            ll
        }

        let flat = gen.to_flat();
        let step = 1e-5;
        let exact: Vec<f64> = (0..flat.len())
            .map(|i| {
                let mut plus = gen.clone();
                let mut minus = gen.clone();
                let mut f = flat.clone();
                f[i] += step;
                plus.set_flat(&f).unwrap();
                f[i] -= 2.0 * step;
                minus.set_flat(&f).unwrap();
                (objective(&plus) - objective(&minus)) / (2.0 * step)
            })
            .collect();

        let n = 100_000usize;
        let dim = flat.len();
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        let mut mc_rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..n {
            let (g, _) = clamped_episode_gradient(&gen, &topo, &x, &y, &mut mc_rng).unwrap();
            for (i, v) in g.to_flat().iter().enumerate() {
                sum[i] += v;
                sum_sq[i] += v * v;
            }
        }
        for i in 0..dim {
            let mean = sum[i] / n as f64;
            let var = (sum_sq[i] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - exact[i]).abs() <= 3.0 * se + 1e-9,
                "coordinate {}: mc {} exact {} se {}",
                i,
                mean,
                exact[i],
                se
            );
        }
    }

    #[test]
    fn ml_training_improves_likelihood_without_hidden_neurons() {
        let topo = single_neuron_topo();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut gen = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let x = SpikeTrain::from_values(1, 10, &[1, 1, 0, 0, 1, 1, 0, 0, 1, 1]).unwrap();
        let y = SpikeTrain::ones(1, 10);
        let h = SpikeTrain::zeros(0, 10);
        let before = log_likelihood(&gen, &topo, &x, &h, &y).unwrap();
        let mut c = cfg(0.0, 0.05, 1, 10);
        c.gen_loss = GanMode::NonSaturating;
        for _ in 0..200 {
            ml_train_step(&mut gen, &topo, &[(x.clone(), y.clone())], &c, &mut rng).unwrap();
        }
        let after = log_likelihood(&gen, &topo, &x, &h, &y).unwrap();
        assert!(after > before, "{} !> {}", after, before);
    }

    #[test]
    fn spikegan_step_is_deterministic_given_seed() {
        let topo = SnnTopology::layered(1, 2, 1).unwrap();
        let basis = exp_basis(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let gen0 = SnnParams::init(&topo, basis.clone(), basis, &mut rng);
        let disc0 = tiny_disc(10, 21);
        let batch = temporal_batch(5, 4, 22);
        let c = cfg(0.05, 0.05, 4, 5);
        let run = || {
            let mut gen = gen0.clone();
            let mut disc = disc0.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..3 {
                spikegan_step(
                    &mut gen,
                    &mut disc,
                    &topo,
                    &batch,
                    DiscEncoding::Spikes,
                    &c,
                    &mut rng,
                )
                .unwrap();
            }
            (gen, disc)
        };
        let (g1, d1) = run();
        let (g2, d2) = run();
        assert_eq!(g1, g2);
        assert_eq!(d1, d2);
    }
}
