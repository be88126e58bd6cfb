//! Experiment configuration: a flat `key = value` text format that is echoed
//! verbatim into every artifact directory, plus the compact discriminator
//! architecture grammar (`c128k4s2xc1k4s1x1`).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::GanMode;

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    DigitsGan,
    DigitsNoise,
    NeuromorphicGan,
    TemporalGan,
    TemporalBayes,
    TemporalMl,
    MetaContinual,
    Gradcheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::DigitsGan,
        ExperimentId::DigitsNoise,
        ExperimentId::NeuromorphicGan,
        ExperimentId::TemporalGan,
        ExperimentId::TemporalBayes,
        ExperimentId::TemporalMl,
        ExperimentId::MetaContinual,
        ExperimentId::Gradcheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::DigitsGan => "digits-gan",
            ExperimentId::DigitsNoise => "digits-noise",
            ExperimentId::NeuromorphicGan => "neuromorphic-gan",
            ExperimentId::TemporalGan => "temporal-gan",
            ExperimentId::TemporalBayes => "temporal-bayes",
            ExperimentId::TemporalMl => "temporal-ml",
            ExperimentId::MetaContinual => "meta-continual",
            ExperimentId::Gradcheck => "gradcheck",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .iter()
            .find(|id| id.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment '{}'; expected one of: {}",
                    s,
                    ExperimentId::ALL.map(|id| id.name()).join(", ")
                ))
            })
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How generator output is presented to the discriminator (and to plots).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Rate,
    TimeSurface,
    /// raw spikes, channel-stacked
    None,
}

impl DecodeMode {
    pub fn name(&self) -> &'static str {
        match self {
            DecodeMode::Rate => "rate",
            DecodeMode::TimeSurface => "time_surface",
            DecodeMode::None => "none",
        }
    }
}

impl FromStr for DecodeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(DecodeMode::Rate),
            "time_surface" => Ok(DecodeMode::TimeSurface),
            "none" => Ok(DecodeMode::None),
            other => Err(Error::Config(format!(
                "unknown decode mode '{}'; expected rate, time_surface, or none",
                other
            ))),
        }
    }
}

/// Synaptic filter basis family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Exponential,
    RaisedCosine,
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::Exponential => "exponential",
            BasisKind::RaisedCosine => "raised_cosine",
        }
    }
}

impl FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(BasisKind::Exponential),
            "raised_cosine" => Ok(BasisKind::RaisedCosine),
            other => Err(Error::Config(format!(
                "unknown basis '{}'; expected exponential or raised_cosine",
                other
            ))),
        }
    }
}

/// One parsed convolutional stage of the discriminator grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStage {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Parsed discriminator architecture: conv stages, optionally ending in a
/// dense head of the given width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscArch {
    pub convs: Vec<ConvStage>,
    pub dense_head: Option<usize>,
}

/// Parse the compact architecture grammar: stages separated by `x`, each
/// `c<channels>k<kernel>s<stride>`; a bare trailing integer is a dense head.
pub fn parse_conv_spec(spec: &str) -> Result<DiscArch> {
    if spec.is_empty() {
        return Err(Error::Parse("empty architecture spec".into()));
    }
    let mut convs = Vec::new();
    let mut dense_head = None;
    let mut pos = 0usize;
    for token in spec.split('x') {
        if dense_head.is_some() {
            return Err(Error::Parse(format!(
                "token '{}' at position {}: dense head must be the final stage",
                token, pos
            )));
        }
        if let Ok(width) = token.parse::<usize>() {
            if width == 0 {
                return Err(Error::Parse(format!(
                    "token '{}' at position {}: dense head width must be >= 1",
                    token, pos
                )));
            }
            dense_head = Some(width);
        } else {
            convs.push(parse_conv_stage(token, pos)?);
        }
        pos += token.len() + 1;
    }
    if convs.is_empty() {
        return Err(Error::Parse("architecture spec has no conv stages".into()));
    }
    Ok(DiscArch { convs, dense_head })
}

fn parse_conv_stage(token: &str, pos: usize) -> Result<ConvStage> {
    let fail = |why: &str| {
        Error::Parse(format!("token '{}' at position {}: {}", token, pos, why))
    };
    let rest = token.strip_prefix('c').ok_or_else(|| fail("expected 'c<n>k<n>s<n>'"))?;
    let (channels, rest) = take_int(rest).ok_or_else(|| fail("missing channel count"))?;
    let rest = rest.strip_prefix('k').ok_or_else(|| fail("expected 'k' after channels"))?;
    let (kernel, rest) = take_int(rest).ok_or_else(|| fail("missing kernel width"))?;
    let rest = rest.strip_prefix('s').ok_or_else(|| fail("expected 's' after kernel"))?;
    let (stride, rest) = take_int(rest).ok_or_else(|| fail("missing stride"))?;
    if !rest.is_empty() {
        return Err(fail("trailing characters"));
    }
    if channels == 0 {
        return Err(fail("channels must be >= 1"));
    }
    if kernel == 0 {
        return Err(fail("kernel must be >= 1"));
    }
    if stride == 0 {
        return Err(fail("stride must be >= 1"));
    }
    Ok(ConvStage { channels, kernel, stride })
}

fn take_int(s: &str) -> Option<(usize, &str)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    if end == 0 {
        return None;
    }
    s[..end].parse().ok().map(|n| (n, &s[end..]))
}

/// Scale preset: paper-sized runs or quick desk-sized ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset '{}'", other))),
        }
    }
}

/// Everything a run needs, flattened. Defaults are desk scale; presets and
/// config files override.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub dataset: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,

    // generator shape
    pub t: usize,
    pub tau_w: usize,
    pub tau_f: f64,
    pub basis: BasisKind,
    pub basis_k: usize,
    pub hidden: usize,

    // adversarial training
    pub mu_disc: f64,
    pub mu_gen: f64,
    pub svgd_eta: f64,
    pub batch: usize,
    pub iterations: usize,
    pub saturating_loss: bool,
    pub particles: usize,

    // discriminator + decoding
    pub decode: DecodeMode,
    pub tau_s: f64,
    pub conv_spec: Option<String>,
    pub disc_hidden: Vec<usize>,

    // evaluation
    pub eval_every: usize,
    pub eval_samples: usize,
    pub clf_steps: usize,
    pub clf_lr: f64,
    pub clf_batch: usize,
    pub noise_fractions: Vec<f64>,
    pub digit_pair: (usize, usize),
    /// train on all ten digit classes instead of the configured pair
    pub all_classes: bool,

    // continual meta-learning
    pub tasks: usize,
    pub batches_per_task: usize,
    pub meta_n: usize,
    pub meta_m: usize,
    pub k_steps: usize,
    pub mu_meta: f64,

    pub checkpoint_every: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        ExperimentConfig {
            experiment,
            dataset: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            t: 5,
            tau_w: 5,
            tau_f: 2.0,
            basis: BasisKind::Exponential,
            basis_k: 1,
            hidden: 32,
            mu_disc: 1e-3,
            mu_gen: 1e-2,
            svgd_eta: 1e-2,
            batch: 20,
            iterations: 500,
            saturating_loss: true,
            particles: 1,
            decode: DecodeMode::Rate,
            tau_s: 2.0,
            conv_spec: None,
            disc_hidden: vec![128],
            eval_every: 100,
            eval_samples: 200,
            clf_steps: 2000,
            clf_lr: 0.05,
            clf_batch: 32,
            noise_fractions: vec![0.0, 0.1, 0.5],
            digit_pair: (0, 1),
            all_classes: false,
            tasks: 100,
            batches_per_task: 5,
            meta_n: 10,
            meta_m: 5,
            k_steps: 10,
            mu_meta: 0.1,
            checkpoint_every: 0,
        }
    }

    /// Apply the named scale preset for this experiment.
    pub fn with_preset(mut self, preset: Preset) -> Self {
        match preset {
            Preset::Desk => match self.experiment {
                ExperimentId::TemporalGan | ExperimentId::TemporalBayes | ExperimentId::TemporalMl => {
                    self.t = 50;
                    self.tau_w = 30;
                    self.basis = BasisKind::RaisedCosine;
                    self.basis_k = 8;
                    self.hidden = 0;
                    self.decode = DecodeMode::None;
                    self.conv_spec = Some("c8k4s2xc1k4s1x1".into());
                    if self.experiment == ExperimentId::TemporalBayes {
                        self.particles = 5;
                        // minority-mode recovery needs a fast critic and a
                        // long run; see the mode-coverage integration test
                        self.mu_disc = 1e-2;
                        self.iterations = 10_000;
                    } else {
                        self.particles = 1;
                    }
                }
                ExperimentId::DigitsGan | ExperimentId::DigitsNoise => {
                    self.t = 5;
                    self.hidden = 0;
                    self.decode = if self.experiment == ExperimentId::DigitsNoise {
                        DecodeMode::TimeSurface
                    } else {
                        DecodeMode::Rate
                    };
                    // conditional separation of the classes only emerges with
                    // a sharp critic and non-vanishing rewards
                    self.saturating_loss = false;
                    self.mu_disc = 1e-2;
                    self.iterations = 5000;
                }
                ExperimentId::NeuromorphicGan => {
                    // two kernel-4 conv stages need T >= 10
                    self.t = 10;
                    self.hidden = 32;
                    self.decode = DecodeMode::None;
                    self.conv_spec = Some("c16k4s2xc1k4s1x1".into());
                    self.saturating_loss = false;
                    self.mu_disc = 1e-2;
                    self.iterations = 5000;
                }
                ExperimentId::MetaContinual => {
                    self.t = 5;
                    self.hidden = 16;
                    self.tasks = 100;
                    self.saturating_loss = false;
                    self.mu_disc = 1e-2;
                }
                ExperimentId::Gradcheck => {}
            },
            Preset::Paper => match self.experiment {
                ExperimentId::TemporalGan | ExperimentId::TemporalBayes | ExperimentId::TemporalMl => {
                    self.t = 50;
                    self.tau_w = 30;
                    self.basis = BasisKind::RaisedCosine;
                    self.basis_k = 8;
                    self.hidden = 0;
                    self.decode = DecodeMode::None;
                    self.conv_spec = Some("c128k4s2xc1k4s1x1".into());
                    self.particles =
                        if self.experiment == ExperimentId::TemporalBayes { 5 } else { 1 };
                    self.batch = 100;
                }
                ExperimentId::DigitsGan | ExperimentId::DigitsNoise => {
                    self.hidden = 128;
                    self.batch = 100;
                    self.iterations = 5000;
                    self.all_classes = true;
                }
                ExperimentId::NeuromorphicGan => {
                    self.t = 10;
                    self.hidden = 128;
                    self.decode = DecodeMode::None;
                    self.conv_spec = Some("c128k4s2xc1k4s1x1".into());
                    self.batch = 100;
                    self.all_classes = true;
                }
                ExperimentId::MetaContinual => {
                    self.hidden = 100;
                    self.tasks = 1000;
                }
                ExperimentId::Gradcheck => {}
            },
        }
        self
    }

    /// Parse the flat text format; `text` holds `key = value` lines, `#`
    /// comments, and blank lines. The `experiment` key is required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut experiment = None;
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{}'", lineno + 1, line))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key == "experiment" {
                experiment = Some(value.parse::<ExperimentId>()?);
            } else {
                pairs.push((lineno + 1, key.to_string(), value.to_string()));
            }
        }
        let experiment = experiment
            .ok_or_else(|| Error::Config("missing required key 'experiment'".into()))?;
        let mut cfg = ExperimentConfig::new(experiment);
        for (lineno, key, value) in pairs {
            cfg.set(&key, &value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno, e)))?;
        }
        Ok(cfg)
    }

    /// Set one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Config(format!("key '{}': cannot parse '{}'", key, value))
            })
        }
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "t" => self.t = num(key, value)?,
            "tau_w" => self.tau_w = num(key, value)?,
            "tau_f" => self.tau_f = num(key, value)?,
            "basis" => self.basis = value.parse()?,
            "basis_k" => self.basis_k = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "mu_disc" => self.mu_disc = num(key, value)?,
            "mu_gen" => self.mu_gen = num(key, value)?,
            "svgd_eta" => self.svgd_eta = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "saturating_loss" => self.saturating_loss = num(key, value)?,
            "particles" => self.particles = num(key, value)?,
            "decode" => self.decode = value.parse()?,
            "tau_s" => self.tau_s = num(key, value)?,
            "conv_spec" => {
                parse_conv_spec(value)?;
                self.conv_spec = Some(value.to_string());
            }
            "disc_hidden" => {
                self.disc_hidden = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num("disc_hidden", s.trim()))
                    .collect::<Result<_>>()?;
            }
            "eval_every" => self.eval_every = num(key, value)?,
            "eval_samples" => self.eval_samples = num(key, value)?,
            "clf_steps" => self.clf_steps = num(key, value)?,
            "clf_lr" => self.clf_lr = num(key, value)?,
            "clf_batch" => self.clf_batch = num(key, value)?,
            "all_classes" => self.all_classes = num(key, value)?,
            "noise_fractions" => {
                self.noise_fractions = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num("noise_fractions", s.trim()))
                    .collect::<Result<_>>()?;
            }
            "digit_pair" => {
                let (a, b) = value.split_once(',').ok_or_else(|| {
                    Error::Config("digit_pair expects 'a,b'".into())
                })?;
                self.digit_pair = (num("digit_pair", a.trim())?, num("digit_pair", b.trim())?);
            }
            "tasks" => self.tasks = num(key, value)?,
            "batches_per_task" => self.batches_per_task = num(key, value)?,
            "meta_n" => self.meta_n = num(key, value)?,
            "meta_m" => self.meta_m = num(key, value)?,
            "k_steps" => self.k_steps = num(key, value)?,
            "mu_meta" => self.mu_meta = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown key '{}'", other)));
            }
        }
        Ok(())
    }

    /// Serialize every field; parsing the result reproduces the config.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("experiment", self.experiment.name().into());
        if let Some(d) = &self.dataset {
            push("dataset", d.display().to_string());
        }
        push("out_dir", self.out_dir.display().to_string());
        push("seed", self.seed.to_string());
        push("t", self.t.to_string());
        push("tau_w", self.tau_w.to_string());
        push("tau_f", self.tau_f.to_string());
        push("basis", self.basis.name().into());
        push("basis_k", self.basis_k.to_string());
        push("hidden", self.hidden.to_string());
        push("mu_disc", self.mu_disc.to_string());
        push("mu_gen", self.mu_gen.to_string());
        push("svgd_eta", self.svgd_eta.to_string());
        push("batch", self.batch.to_string());
        push("iterations", self.iterations.to_string());
        push("saturating_loss", self.saturating_loss.to_string());
        push("particles", self.particles.to_string());
        push("decode", self.decode.name().into());
        push("tau_s", self.tau_s.to_string());
        if let Some(c) = &self.conv_spec {
            push("conv_spec", c.clone());
        }
        push(
            "disc_hidden",
            self.disc_hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        push("eval_every", self.eval_every.to_string());
        push("eval_samples", self.eval_samples.to_string());
        push("clf_steps", self.clf_steps.to_string());
        push("clf_lr", self.clf_lr.to_string());
        push("clf_batch", self.clf_batch.to_string());
        push(
            "noise_fractions",
            self.noise_fractions.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","),
        );
        push("digit_pair", format!("{},{}", self.digit_pair.0, self.digit_pair.1));
        push("all_classes", self.all_classes.to_string());
        push("tasks", self.tasks.to_string());
        push("batches_per_task", self.batches_per_task.to_string());
        push("meta_n", self.meta_n.to_string());
        push("meta_m", self.meta_m.to_string());
        push("k_steps", self.k_steps.to_string());
        push("mu_meta", self.mu_meta.to_string());
        push("checkpoint_every", self.checkpoint_every.to_string());
        out
    }

    pub fn gan_mode(&self) -> GanMode {
        if self.saturating_loss {
            GanMode::Saturating
        } else {
            GanMode::NonSaturating
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.batch == 0 {
            return Err(Error::Config("t and batch must be positive".into()));
        }
        if self.tau_w == 0 || self.basis_k == 0 {
            return Err(Error::Config("tau_w and basis_k must be positive".into()));
        }
        if self.particles == 0 {
            return Err(Error::Config("particles must be >= 1".into()));
        }
        if self.digit_pair.0 == self.digit_pair.1 || self.digit_pair.0 > 9 || self.digit_pair.1 > 9
        {
            return Err(Error::Config("digit_pair must name two distinct digits 0-9".into()));
        }
        for &f in &self.noise_fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("noise fraction {} outside [0,1]", f)));
            }
        }
        Ok(())
    }
}
