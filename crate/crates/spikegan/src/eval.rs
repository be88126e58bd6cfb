//! Generator quality measures: train-on-synthetic/test-on-real (TSTR) and
//! its mirror (TRTS) with a small softmax classifier, PCA projections fit on
//! real data, and burst/tonic mode-coverage scoring via cyclic template
//! correlation.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::datasets::SpikeMode;
use crate::error::{Error, Result};
use crate::snn::SpikeTrain;
use crate::tensor::{backward, forward, sgd_step, Activation, AnnGrads, AnnParams, Layer, Matrix, StepDirection};

/// One labeled feature vector, the common currency of the classifier-based
/// measures.
pub type LabeledFeatures = (Vec<f64>, usize);

/// Architecture of the evaluation classifier: dense ReLU hidden layers and a
/// linear logit head; softmax lives in the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub in_dim: usize,
    pub hidden: Vec<usize>,
    pub n_classes: usize,
}

impl ClassifierSpec {
    /// The 64x100x100x10 digit classifier.
    pub fn digits() -> Self {
        ClassifierSpec { in_dim: 64, hidden: vec![100, 100], n_classes: 10 }
    }

    pub fn build(&self, rng: &mut impl Rng) -> AnnParams {
        let mut layers = Vec::new();
        let mut prev = self.in_dim;
        for &h in &self.hidden {
            layers.push(Layer::dense(prev, h, Activation::Relu, rng));
            prev = h;
        }
        layers.push(Layer::dense(prev, self.n_classes, Activation::Identity, rng));
        AnnParams::new(layers)
    }
}

/// Training budget for the evaluation classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierCfg {
    /// minibatch SGD updates
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for ClassifierCfg {
    fn default() -> Self {
        ClassifierCfg { steps: 2000, lr: 0.05, batch: 32 }
    }
}

/// Numerically stable softmax cross-entropy; returns the loss and the logit
/// gradient `p - onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Minibatch SGD training of the softmax classifier.
pub fn train_classifier(
    spec: &ClassifierSpec,
    train_set: &[LabeledFeatures],
    cfg: &ClassifierCfg,
    rng: &mut impl Rng,
) -> Result<AnnParams> {
    if train_set.is_empty() {
        return Err(Error::Dataset("empty classifier training set".into()));
    }
    for (v, label) in train_set {
        if v.len() != spec.in_dim {
            return Err(Error::Dataset(format!(
                "feature length {} does not match classifier input {}",
                v.len(),
                spec.in_dim
            )));
        }
        if *label >= spec.n_classes {
            return Err(Error::Dataset(format!("label {} out of range", label)));
        }
    }
    let mut params = spec.build(rng);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();
    for _ in 0..cfg.steps {
        let mut grads = AnnGrads::zeros_like(&params);
        let b = cfg.batch.min(train_set.len());
        for _ in 0..b {
            if cursor >= order.len() {
                order.shuffle(rng);
                cursor = 0;
            }
            let (features, label) = &train_set[order[cursor]];
            cursor += 1;
            let input = Matrix::column(features);
            let (out, mut tape) = forward(&params, &input)?;
            let (_, logit_grad) = softmax_cross_entropy(&out.data, *label);
            let g = backward(&params, &mut tape, &Matrix::column(&logit_grad))?;
            grads.add_assign(&g);
        }
        grads.scale(1.0 / b as f64);
        sgd_step(&mut params, &grads, cfg.lr, StepDirection::Descent)?;
    }
    Ok(params)
}

/// Arg-max prediction.
pub fn classify(params: &AnnParams, features: &[f64]) -> Result<usize> {
    let (out, _) = forward(params, &Matrix::column(features))?;
    Ok(out
        .data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap())
}

pub fn accuracy(params: &AnnParams, set: &[LabeledFeatures]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Dataset("empty evaluation set".into()));
    }
    let mut correct = 0usize;
    for (v, label) in set {
        if classify(params, v)? == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

fn check_all_classes(set: &[LabeledFeatures], n_classes: usize, who: &str) -> Result<()> {
    let mut seen = vec![false; n_classes];
    for (_, label) in set {
        if *label < n_classes {
            seen[*label] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Dataset(format!("class {} absent from {} set", missing, who)));
    }
    Ok(())
}

/// Train on synthetic, test on real: classifier fit to the synthetic set,
/// accuracy reported on held-out real data.
pub fn tstr(
    synthetic: &[LabeledFeatures],
    real_test: &[LabeledFeatures],
    spec: &ClassifierSpec,
    cfg: &ClassifierCfg,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_all_classes(synthetic, spec.n_classes, "synthetic")?;
    let clf = train_classifier(spec, synthetic, cfg, rng)?;
    accuracy(&clf, real_test)
}

/// Train on real, test on synthetic: the mirror measure.
pub fn trts(
    real_train: &[LabeledFeatures],
    synthetic: &[LabeledFeatures],
    spec: &ClassifierSpec,
    cfg: &ClassifierCfg,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_all_classes(real_train, spec.n_classes, "real training")?;
    let clf = train_classifier(spec, real_train, cfg, rng)?;
    accuracy(&clf, synthetic)
}

/// Jacobi eigendecomposition of a symmetric matrix; returns eigenvalues and
/// matching eigenvectors (rows) sorted by descending eigenvalue.
pub fn symmetric_eigen(mut a: Vec<Vec<f64>>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(Error::Usage("matrix must be square".into()));
    }
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> =
        order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    Ok((eigenvalues, eigenvectors))
}

/// Principal components fit on the real set only (mean-centered covariance),
/// both sets projected. Returns (real projections, synthetic projections,
/// component vectors).
#[allow(clippy::type_complexity)]
pub fn pca_compare(
    real: &[Vec<f64>],
    synthetic: &[Vec<f64>],
    n_components: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if real.len() <= n_components {
        return Err(Error::Usage(format!(
            "need more than {} real samples for {} components",
            n_components, n_components
        )));
    }
    let dim = real[0].len();
    if n_components > dim {
        return Err(Error::Usage("more components than feature dimensions".into()));
    }
    for v in real.iter().chain(synthetic) {
        if v.len() != dim {
            return Err(Error::Usage("inconsistent feature dimensions".into()));
        }
    }
    let n = real.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|d| real.iter().map(|v| v[d]).sum::<f64>() / n)
        .collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for v in real {
        for i in 0..dim {
            let vi = v[i] - mean[i];
            for j in i..dim {
                cov[i][j] += vi * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    let (_, vectors) = symmetric_eigen(cov)?;
    let components: Vec<Vec<f64>> = vectors.into_iter().take(n_components).collect();
    let project = |set: &[Vec<f64>]| -> Vec<Vec<f64>> {
        set.iter()
            .map(|v| {
                components
                    .iter()
                    .map(|c| c.iter().zip(v).zip(&mean).map(|((ci, vi), mi)| ci * (vi - mi)).sum())
                    .collect()
            })
            .collect()
    };
    Ok((project(real), project(synthetic), components))
}

/// Which template a sample best matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeAssignment {
    Burst,
    Tonic,
    /// best normalized correlation below threshold (or empty sample)
    Neither,
}

/// Correlation threshold below which a sample matches no template.
pub const MODE_MATCH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ModeCoverage {
    pub burst_fraction: f64,
    pub tonic_fraction: f64,
    pub neither_fraction: f64,
    pub assignments: Vec<(ModeAssignment, f64)>,
}

/// Maximum over cyclic shifts of the normalized cross-correlation between a
/// binary sample row and a template tiled to the same length.
pub fn cyclic_correlation(sample: &[u8], template: &[u8]) -> f64 {
    let t = sample.len();
    let norm_s: f64 = (sample.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>()).sqrt();
    let norm_t: f64 = (template.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>()).sqrt();
    if norm_s == 0.0 || norm_t == 0.0 {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    for shift in 0..t {
        let dot: f64 = (0..t)
            .map(|tau| sample[tau] as f64 * template[(tau + shift) % t] as f64)
            .sum();
        best = best.max(dot / (norm_s * norm_t));
    }
    best
}

/// Assign each single-row sample to burst or tonic by cyclic template
/// correlation; the fractions report coverage of each firing mode.
pub fn mode_coverage(samples: &[SpikeTrain]) -> Result<ModeCoverage> {
    if samples.is_empty() {
        return Err(Error::Usage("no samples to score".into()));
    }
    let min_t = SpikeMode::Burst.period().max(SpikeMode::Tonic.period());
    let mut assignments = Vec::with_capacity(samples.len());
    let mut counts = [0usize; 3];
    for sample in samples {
        if sample.t < min_t {
            return Err(Error::Usage(format!(
                "sample length {} shorter than template period {}",
                sample.t, min_t
            )));
        }
        let row = sample.row(0);
        let burst_t = tiled_template(SpikeMode::Burst, sample.t);
        let tonic_t = tiled_template(SpikeMode::Tonic, sample.t);
        let cb = cyclic_correlation(row, &burst_t);
        let ct = cyclic_correlation(row, &tonic_t);
        let (assignment, corr) = if cb.max(ct) < MODE_MATCH_THRESHOLD {
            (ModeAssignment::Neither, cb.max(ct))
        } else if cb >= ct {
            (ModeAssignment::Burst, cb)
        } else {
            (ModeAssignment::Tonic, ct)
        };
        counts[match assignment {
            ModeAssignment::Burst => 0,
            ModeAssignment::Tonic => 1,
            ModeAssignment::Neither => 2,
        }] += 1;
        assignments.push((assignment, corr));
    }
    let n = samples.len() as f64;
    Ok(ModeCoverage {
        burst_fraction: counts[0] as f64 / n,
        tonic_fraction: counts[1] as f64 / n,
        neither_fraction: counts[2] as f64 / n,
        assignments,
    })
}

fn tiled_template(mode: SpikeMode, t: usize) -> Vec<u8> {
    let template = mode.template();
    (0..t).map(|tau| template[tau % template.len()]).collect()
}

/// One named measurement plus enough context to reproduce it.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub n_real: usize,
    pub n_synth: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "metric,value,n_real,n_synth,seed"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.metric, self.value, self.n_real, self.n_synth, self.seed)
    }
}
