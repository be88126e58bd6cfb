//! The probabilistic spiking generator: GLM neurons wired into a loop-free
//! topology (self-feedback excepted), sequential Bernoulli sampling, sequence
//! likelihoods, and the local per-parameter gradients that drive every
//! training rule in this crate.
//!
//! A neuron's membrane potential at step `tau` filters the last `tau_w` spikes
//! of each pre-synaptic source through a learned linear combination of basis
//! functions, adds a filtered self-feedback term and a bias, and the spike is
//! Bernoulli with probability `sigmoid(u)`. Windows strictly cover
//! `tau-1 ..= tau-tau_w`; there is no same-step input.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::codec::BasisMatrix;
use crate::error::{Error, Result};
use crate::tensor::sigmoid;

/// Binary spike matrix: `n_neurons` rows over `t` timesteps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    pub n_neurons: usize,
    pub t: usize,
    data: Vec<u8>,
}

impl SpikeTrain {
    pub fn zeros(n_neurons: usize, t: usize) -> Self {
        SpikeTrain { n_neurons, t, data: vec![0; n_neurons * t] }
    }

    pub fn ones(n_neurons: usize, t: usize) -> Self {
        SpikeTrain { n_neurons, t, data: vec![1; n_neurons * t] }
    }

    /// Build from row-major 0/1 values; rejects anything non-binary.
    pub fn from_values(n_neurons: usize, t: usize, values: &[u8]) -> Result<Self> {
        if values.len() != n_neurons * t {
            return Err(Error::Usage(format!(
                "spike train values length {} != {}x{}",
                values.len(),
                n_neurons,
                t
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::Usage("spike train values must be 0 or 1".into()));
        }
        Ok(SpikeTrain { n_neurons, t, data: values.to_vec() })
    }

    #[inline]
    pub fn get(&self, neuron: usize, tau: usize) -> u8 {
        self.data[neuron * self.t + tau]
    }

    #[inline]
    pub fn set(&mut self, neuron: usize, tau: usize, spike: bool) {
        self.data[neuron * self.t + tau] = spike as u8;
    }

    pub fn row(&self, neuron: usize) -> &[u8] {
        &self.data[neuron * self.t..(neuron + 1) * self.t]
    }

    pub fn values(&self) -> &[u8] {
        &self.data
    }

    pub fn spike_count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Stack rows of `other` below `self` (same `t`).
    pub fn vstack(&self, other: &SpikeTrain) -> Result<SpikeTrain> {
        if self.t != other.t {
            return Err(Error::Usage("vstack requires equal episode lengths".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(SpikeTrain { n_neurons: self.n_neurons + other.n_neurons, t: self.t, data })
    }
}

/// A pre-synaptic source: either an exogenous input row or another neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreSource {
    Input(usize),
    Neuron(usize),
}

/// Directed synapse from a source to a destination neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Synapse {
    pub source: PreSource,
    pub target: usize,
}

/// Network wiring: exogenous inputs, hidden and read-out neuron ids, the
/// synapse list, and the per-neuron self-feedback flags. The neuron-to-neuron
/// graph must be acyclic; an evaluation order is fixed at construction
/// (topological, ties broken by neuron id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnnTopology {
    pub n_exogenous: usize,
    pub n_neurons: usize,
    pub readout: Vec<usize>,
    pub synapses: Vec<Synapse>,
    pub self_feedback: Vec<bool>,
    order: Vec<usize>,
}

impl SnnTopology {
    pub fn new(
        n_exogenous: usize,
        n_neurons: usize,
        readout: Vec<usize>,
        synapses: Vec<Synapse>,
        self_feedback: Vec<bool>,
    ) -> Result<Self> {
        if self_feedback.len() != n_neurons {
            return Err(Error::Usage("self_feedback length must equal n_neurons".into()));
        }
        for r in &readout {
            if *r >= n_neurons {
                return Err(Error::Usage(format!("read-out id {} out of range", r)));
            }
        }
        for s in &synapses {
            if s.target >= n_neurons {
                return Err(Error::Usage(format!("synapse target {} out of range", s.target)));
            }
            match s.source {
                PreSource::Input(i) if i >= n_exogenous => {
                    return Err(Error::Usage(format!("synapse input source {} out of range", i)))
                }
                PreSource::Neuron(j) if j >= n_neurons => {
                    return Err(Error::Usage(format!("synapse neuron source {} out of range", j)))
                }
                PreSource::Neuron(j) if j == s.target => {
                    return Err(Error::Topology(
                        "explicit self-loop synapse; use the self_feedback flag".into(),
                    ))
                }
                _ => {}
            }
        }
        let order = topo_order(n_neurons, &synapses)?;
        let topo = SnnTopology { n_exogenous, n_neurons, readout, synapses, self_feedback, order };
        topo.check_reachability()?;
        Ok(topo)
    }

    /// Layered wiring: every input feeds every neuron, every hidden neuron
    /// feeds every read-out neuron; all neurons keep self-feedback. Hidden
    /// neurons are ids `0..n_hidden`, read-outs follow.
    pub fn layered(n_exogenous: usize, n_hidden: usize, n_readout: usize) -> Result<Self> {
        let n_neurons = n_hidden + n_readout;
        let mut synapses = Vec::new();
        for i in 0..n_exogenous {
            for n in 0..n_neurons {
                synapses.push(Synapse { source: PreSource::Input(i), target: n });
            }
        }
        for h in 0..n_hidden {
            for r in n_hidden..n_neurons {
                synapses.push(Synapse { source: PreSource::Neuron(h), target: r });
            }
        }
        SnnTopology::new(
            n_exogenous,
            n_neurons,
            (n_hidden..n_neurons).collect(),
            synapses,
            vec![true; n_neurons],
        )
    }

    pub fn hidden(&self) -> Vec<usize> {
        (0..self.n_neurons).filter(|i| !self.readout.contains(i)).collect()
    }

    pub fn evaluation_order(&self) -> &[usize] {
        &self.order
    }

    fn check_reachability(&self) -> Result<()> {
        let mut reachable = vec![false; self.n_neurons];
        let mut frontier: Vec<usize> = self
            .synapses
            .iter()
            .filter(|s| matches!(s.source, PreSource::Input(_)))
            .map(|s| s.target)
            .collect();
        while let Some(n) = frontier.pop() {
            if reachable[n] {
                continue;
            }
            reachable[n] = true;
            for s in &self.synapses {
                if s.source == PreSource::Neuron(n) && !reachable[s.target] {
                    frontier.push(s.target);
                }
            }
        }
        for r in &self.readout {
            if !reachable[*r] {
                return Err(Error::Topology(format!(
                    "read-out neuron {} unreachable from exogenous inputs",
                    r
                )));
            }
        }
        Ok(())
    }
}

/// Kahn's algorithm over the neuron-to-neuron edges; ties broken by id.
fn topo_order(n_neurons: usize, synapses: &[Synapse]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n_neurons];
    for s in synapses {
        if let PreSource::Neuron(_) = s.source {
            indeg[s.target] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n_neurons).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n_neurons);
    while !ready.is_empty() {
        ready.sort_unstable_by(|a, b| b.cmp(a));
        let n = ready.pop().unwrap();
        order.push(n);
        for s in synapses {
            if s.source == PreSource::Neuron(n) {
                indeg[s.target] -= 1;
                if indeg[s.target] == 0 {
                    ready.push(s.target);
                }
            }
        }
    }
    if order.len() != n_neurons {
        return Err(Error::Topology("synapse graph contains a cycle".into()));
    }
    Ok(order)
}

/// Trainable parameters: per-synapse filter weights, per-neuron feedback
/// weights and biases, plus the shared basis matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnParams {
    pub basis_a: BasisMatrix,
    pub basis_b: BasisMatrix,
    /// per synapse, length `basis_a.k`
    pub w_alpha: Vec<Vec<f64>>,
    /// per neuron, length `basis_b.k`
    pub w_beta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

impl SnnParams {
    /// Weights ~ Normal(0, 0.1^2), biases zero.
    pub fn init(
        topology: &SnnTopology,
        basis_a: BasisMatrix,
        basis_b: BasisMatrix,
        rng: &mut impl Rng,
    ) -> Self {
        let normal = Normal::new(0.0, 0.1).unwrap();
        let w_alpha = (0..topology.synapses.len())
            .map(|_| (0..basis_a.k).map(|_| normal.sample(rng)).collect())
            .collect();
        let w_beta = (0..topology.n_neurons)
            .map(|_| (0..basis_b.k).map(|_| normal.sample(rng)).collect())
            .collect();
        SnnParams { basis_a, basis_b, w_alpha, w_beta, gamma: vec![0.0; topology.n_neurons] }
    }

    pub fn n_params(&self) -> usize {
        self.w_alpha.iter().map(Vec::len).sum::<usize>()
            + self.w_beta.iter().map(Vec::len).sum::<usize>()
            + self.gamma.len()
    }

    /// Flat order: all w_alpha (synapse-major), all w_beta, all gamma.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for w in &self.w_alpha {
            out.extend_from_slice(w);
        }
        for w in &self.w_beta {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.gamma);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Usage(format!(
                "flat length {} != parameter count {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut i = 0;
        for w in &mut self.w_alpha {
            let n = w.len();
            w.copy_from_slice(&flat[i..i + n]);
            i += w.len();
        }
        for w in &mut self.w_beta {
            let n = w.len();
            w.copy_from_slice(&flat[i..i + n]);
            i += w.len();
        }
        self.gamma.copy_from_slice(&flat[i..]);
        Ok(())
    }

    /// `self += scale * grads`
    pub fn axpy(&mut self, scale: f64, grads: &SnnGrads) {
        for (w, g) in self.w_alpha.iter_mut().zip(&grads.w_alpha) {
            for (a, b) in w.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
        for (w, g) in self.w_beta.iter_mut().zip(&grads.w_beta) {
            for (a, b) in w.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
        for (a, b) in self.gamma.iter_mut().zip(&grads.gamma) {
            *a += scale * b;
        }
    }
}

/// Per-parameter gradient accumulator, shaped like [`SnnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct SnnGrads {
    pub w_alpha: Vec<Vec<f64>>,
    pub w_beta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

impl SnnGrads {
    pub fn zeros_like(params: &SnnParams) -> Self {
        SnnGrads {
            w_alpha: params.w_alpha.iter().map(|w| vec![0.0; w.len()]).collect(),
            w_beta: params.w_beta.iter().map(|w| vec![0.0; w.len()]).collect(),
            gamma: vec![0.0; params.gamma.len()],
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &SnnGrads) {
        for (w, g) in self.w_alpha.iter_mut().zip(&other.w_alpha) {
            for (a, b) in w.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
        for (w, g) in self.w_beta.iter_mut().zip(&other.w_beta) {
            for (a, b) in w.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
        for (a, b) in self.gamma.iter_mut().zip(&other.gamma) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.w_alpha {
            for a in w.iter_mut() {
                *a *= s;
            }
        }
        for w in &mut self.w_beta {
            for a in w.iter_mut() {
                *a *= s;
            }
        }
        for a in &mut self.gamma {
            *a *= s;
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in &self.w_alpha {
            out.extend_from_slice(w);
        }
        for w in &self.w_beta {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.gamma);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Membrane potential from explicit spike windows.
///
/// `presyn_windows` pairs each synapse weight vector with the window of its
/// source's recent spikes, newest first (`s_{tau-1}` at index 0).
pub fn membrane_potential(
    params: &SnnParams,
    neuron: usize,
    presyn_windows: &[(usize, &[f64])],
    feedback_window: Option<&[f64]>,
) -> Result<f64> {
    let tau_w = params.basis_a.tau_w;
    let mut u = params.gamma[neuron];
    for (syn_idx, window) in presyn_windows {
        if window.len() != tau_w {
            return Err(Error::Usage(format!(
                "pre-synaptic window length {} != tau_w {}",
                window.len(),
                tau_w
            )));
        }
        u += filter_dot(&params.basis_a, &params.w_alpha[*syn_idx], window);
    }
    if let Some(window) = feedback_window {
        if window.len() != params.basis_b.tau_w {
            return Err(Error::Usage(format!(
                "feedback window length {} != tau_w {}",
                window.len(),
                params.basis_b.tau_w
            )));
        }
        u += filter_dot(&params.basis_b, &params.w_beta[neuron], window);
    }
    Ok(u)
}

/// `(basis * weights) . window`
#[inline]
fn filter_dot(basis: &BasisMatrix, weights: &[f64], window: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (lag, &s) in window.iter().enumerate() {
        if s != 0.0 {
            let mut f = 0.0;
            for (k, &w) in weights.iter().enumerate() {
                f += basis.get(lag, k) * w;
            }
            acc += f * s;
        }
    }
    acc
}

/// Spike probability from a membrane potential.
#[inline]
pub fn spike_probability(u: f64) -> f64 {
    sigmoid(u)
}

/// Local gradient of `log p(s | u)` with respect to one weight vector and
/// the bias: `Basis^T window * (s - sigmoid(u))` and `s - sigmoid(u)`.
pub fn local_gradient(
    basis: &BasisMatrix,
    window: &[f64],
    s: f64,
    u: f64,
) -> (Vec<f64>, f64) {
    let err = s - sigmoid(u);
    let mut grad_w = vec![0.0; basis.k];
    for (lag, &x) in window.iter().enumerate() {
        if x != 0.0 {
            for (k, g) in grad_w.iter_mut().enumerate() {
                *g += basis.get(lag, k) * x * err;
            }
        }
    }
    (grad_w, err)
}

/// Sampled episode: all spikes (hidden and read-out rows), cached membrane
/// potentials, and the accumulated per-parameter log-likelihood gradient.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    /// all neurons x T
    pub spikes: SpikeTrain,
    /// row-major n_neurons x T
    pub potentials: Vec<f64>,
    pub grads: SnnGrads,
}

impl EpisodeTrace {
    pub fn potential(&self, neuron: usize, tau: usize, t: usize) -> f64 {
        self.potentials[neuron * t + tau]
    }

    /// Extract the read-out rows in topology read-out order.
    pub fn readout_train(&self, topology: &SnnTopology) -> SpikeTrain {
        let t = self.spikes.t;
        let mut out = SpikeTrain::zeros(topology.readout.len(), t);
        for (row, &id) in topology.readout.iter().enumerate() {
            for tau in 0..t {
                out.set(row, tau, self.spikes.get(id, tau) == 1);
            }
        }
        out
    }
}

/// Incremental episode state: spike windows for every input and neuron,
/// plus the per-synapse filters precomputed from the current parameters.
///
/// Usage per step: read [`EpisodeRunner::potentials`], pick spikes, call
/// [`EpisodeRunner::accumulate_grads`] if training, then
/// [`EpisodeRunner::advance`].
pub struct EpisodeRunner<'a> {
    params: &'a SnnParams,
    topology: &'a SnnTopology,
    y: &'a SpikeTrain,
    /// per input, newest first, length tau_w
    input_windows: Vec<Vec<f64>>,
    /// per neuron, newest first, length tau_w
    neuron_windows: Vec<Vec<f64>>,
    /// synapse indices grouped by target neuron
    incoming: Vec<Vec<usize>>,
    tau: usize,
}

impl<'a> EpisodeRunner<'a> {
    pub fn new(params: &'a SnnParams, topology: &'a SnnTopology, y: &'a SpikeTrain) -> Result<Self> {
        if y.n_neurons != topology.n_exogenous {
            return Err(Error::Usage(format!(
                "exogenous input has {} rows, topology expects {}",
                y.n_neurons, topology.n_exogenous
            )));
        }
        if params.w_alpha.len() != topology.synapses.len()
            || params.gamma.len() != topology.n_neurons
        {
            return Err(Error::Usage("parameter shapes do not match topology".into()));
        }
        let tau_w = params.basis_a.tau_w;
        let mut incoming = vec![Vec::new(); topology.n_neurons];
        for (idx, syn) in topology.synapses.iter().enumerate() {
            incoming[syn.target].push(idx);
        }
        Ok(EpisodeRunner {
            params,
            topology,
            y,
            input_windows: vec![vec![0.0; tau_w]; topology.n_exogenous],
            neuron_windows: vec![vec![0.0; params.basis_b.tau_w.max(tau_w)]; topology.n_neurons],
            incoming,
            tau: 0,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    fn window_of(&self, src: PreSource, len: usize) -> &[f64] {
        match src {
            PreSource::Input(i) => &self.input_windows[i][..len],
            PreSource::Neuron(n) => &self.neuron_windows[n][..len],
        }
    }

    /// Membrane potentials of every neuron at the current step, in
    /// evaluation order indexed by neuron id.
    pub fn potentials(&self) -> Vec<f64> {
        let tau_w = self.params.basis_a.tau_w;
        let mut u = vec![0.0; self.topology.n_neurons];
        for &n in self.topology.evaluation_order() {
            let mut acc = self.params.gamma[n];
            for &syn_idx in &self.incoming[n] {
                let src = self.topology.synapses[syn_idx].source;
                acc += filter_dot(
                    &self.params.basis_a,
                    &self.params.w_alpha[syn_idx],
                    self.window_of(src, tau_w),
                );
            }
            if self.topology.self_feedback[n] {
                acc += filter_dot(
                    &self.params.basis_b,
                    &self.params.w_beta[n],
                    &self.neuron_windows[n][..self.params.basis_b.tau_w],
                );
            }
            u[n] = acc;
        }
        u
    }

    /// Add this step's local gradients, each neuron's contribution scaled by
    /// `weight(neuron)`.
    pub fn accumulate_grads(
        &self,
        spikes: &[bool],
        potentials: &[f64],
        weight: impl Fn(usize) -> f64,
        grads: &mut SnnGrads,
    ) {
        let tau_w = self.params.basis_a.tau_w;
        for n in 0..self.topology.n_neurons {
            let w = weight(n);
            if w == 0.0 {
                continue;
            }
            let err = (spikes[n] as u8 as f64) - sigmoid(potentials[n]);
            for &syn_idx in &self.incoming[n] {
                let src = self.topology.synapses[syn_idx].source;
                let window = self.window_of(src, tau_w);
                for (lag, &x) in window.iter().enumerate() {
                    if x != 0.0 {
                        for k in 0..self.params.basis_a.k {
                            grads.w_alpha[syn_idx][k] +=
                                w * self.params.basis_a.get(lag, k) * x * err;
                        }
                    }
                }
            }
            if self.topology.self_feedback[n] {
                let window = &self.neuron_windows[n][..self.params.basis_b.tau_w];
                for (lag, &x) in window.iter().enumerate() {
                    if x != 0.0 {
                        for k in 0..self.params.basis_b.k {
                            grads.w_beta[n][k] +=
                                w * self.params.basis_b.get(lag, k) * x * err;
                        }
                    }
                }
            }
            grads.gamma[n] += w * err;
        }
    }

    /// Push this step's spikes and exogenous inputs into the windows and move
    /// to the next step.
    pub fn advance(&mut self, spikes: &[bool]) {
        for (i, window) in self.input_windows.iter_mut().enumerate() {
            window.rotate_right(1);
            window[0] = self.y.get(i, self.tau) as f64;
        }
        for (n, window) in self.neuron_windows.iter_mut().enumerate() {
            window.rotate_right(1);
            window[0] = spikes[n] as u8 as f64;
        }
        self.tau += 1;
    }
}

/// Sample one full episode, caching potentials and accumulating the
/// log-likelihood gradient of every sampled spike.
pub fn forward_sample(
    params: &SnnParams,
    topology: &SnnTopology,
    y: &SpikeTrain,
    rng: &mut impl Rng,
) -> Result<EpisodeTrace> {
    let t = y.t;
    let mut runner = EpisodeRunner::new(params, topology, y)?;
    let mut spikes = SpikeTrain::zeros(topology.n_neurons, t);
    let mut potentials = vec![0.0; topology.n_neurons * t];
    let mut grads = SnnGrads::zeros_like(params);
    let mut step_spikes = vec![false; topology.n_neurons];
    for tau in 0..t {
        let u = runner.potentials();
        for &n in topology.evaluation_order() {
            let p = spike_probability(u[n]);
            step_spikes[n] = rng.gen::<f64>() < p;
            spikes.set(n, tau, step_spikes[n]);
            potentials[n * t + tau] = u[n];
        }
        runner.accumulate_grads(&step_spikes, &u, |_| 1.0, &mut grads);
        runner.advance(&step_spikes);
    }
    Ok(EpisodeTrace { spikes, potentials, grads })
}

/// Log-likelihood of read-out spikes `x` and hidden spikes `h` given inputs
/// `y`, recomputing membrane potentials deterministically.
pub fn log_likelihood(
    params: &SnnParams,
    topology: &SnnTopology,
    x: &SpikeTrain,
    h: &SpikeTrain,
    y: &SpikeTrain,
) -> Result<f64> {
    let t = y.t;
    let hidden = topology.hidden();
    if x.n_neurons != topology.readout.len() || h.n_neurons != hidden.len() {
        return Err(Error::Usage("spike train row counts do not match topology".into()));
    }
    if x.t != t || h.t != t {
        return Err(Error::Usage("episode lengths do not match".into()));
    }
    // rebuild the full spike matrix in neuron-id order
    let mut full = SpikeTrain::zeros(topology.n_neurons, t);
    for (row, &id) in topology.readout.iter().enumerate() {
        for tau in 0..t {
            full.set(id, tau, x.get(row, tau) == 1);
        }
    }
    for (row, &id) in hidden.iter().enumerate() {
        for tau in 0..t {
            full.set(id, tau, h.get(row, tau) == 1);
        }
    }
    let mut runner = EpisodeRunner::new(params, topology, y)?;
    let mut ll = 0.0;
    let mut step_spikes = vec![false; topology.n_neurons];
    for tau in 0..t {
        let u = runner.potentials();
        for n in 0..topology.n_neurons {
            let s = full.get(n, tau);
            let p = spike_probability(u[n]);
            ll += if s == 1 { p.ln() } else { (1.0 - p).ln() };
            step_spikes[n] = s == 1;
        }
        runner.advance(&step_spikes);
    }
    Ok(ll)
}
