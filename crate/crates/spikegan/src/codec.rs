//! Conversions between natural signals and spike trains, plus synaptic
//! filter basis construction.

use rand::Rng;

use crate::error::{Error, Result};
use crate::snn::SpikeTrain;

/// Temporal filter basis: `tau_w` lags by `k` basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub tau_w: usize,
    pub k: usize,
    /// row-major, lag-major: values[lag * k + col]
    pub values: Vec<f64>,
}

impl BasisMatrix {
    pub fn new(tau_w: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != tau_w * k {
            return Err(Error::Usage("basis values length mismatch".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Usage("basis values must be finite".into()));
        }
        let b = BasisMatrix { tau_w, k, values };
        for col in 0..k {
            if (0..tau_w).all(|lag| b.get(lag, col) == 0.0) {
                return Err(Error::Usage(format!("basis column {} is identically zero", col)));
            }
        }
        Ok(b)
    }

    #[inline]
    pub fn get(&self, lag: usize, col: usize) -> f64 {
        self.values[lag * self.k + col]
    }
}

/// Single-column exponential decay basis: entry at lag `tau` is
/// `exp(-tau / tau_f)`.
pub fn exp_basis(tau_w: usize, tau_f: f64) -> Result<BasisMatrix> {
    if tau_w == 0 {
        return Err(Error::Usage("tau_w must be at least 1".into()));
    }
    if tau_f <= 0.0 {
        return Err(Error::Usage("tau_f must be positive".into()));
    }
    let values = (0..tau_w).map(|tau| (-(tau as f64) / tau_f).exp()).collect();
    BasisMatrix::new(tau_w, 1, values)
}

/// Raised cosine basis in log time: column `k` at lag `tau` is
/// `0.5 * (1 + cos(pi * clamp((log(tau+1) - c_k) / w, -1, 1)))` with centers
/// `c_k` evenly spaced over `[0, log(tau_w)]` and width `w` equal to the
/// center spacing. The constants are fixed here so fixtures stay
/// reproducible.
pub fn raised_cosine_basis(tau_w: usize, k: usize) -> Result<BasisMatrix> {
    if tau_w == 0 || k == 0 {
        return Err(Error::Usage("tau_w and k must be at least 1".into()));
    }
    let log_max = (tau_w as f64).ln();
    let spacing = if k > 1 { log_max / (k - 1) as f64 } else { log_max.max(1.0) };
    let width = spacing;
    let mut values = vec![0.0; tau_w * k];
    for lag in 0..tau_w {
        let lt = ((lag + 1) as f64).ln();
        for col in 0..k {
            let center = col as f64 * spacing;
            let arg = ((lt - center) / width).clamp(-1.0, 1.0);
            values[lag * k + col] = 0.5 * (1.0 + (std::f64::consts::PI * arg).cos());
        }
    }
    BasisMatrix::new(tau_w, k, values)
}

/// Bernoulli rate encoding: entry `(i, tau)` spikes with probability `v[i]`.
pub fn rate_encode(v: &[f64], t: usize, rng: &mut impl Rng) -> Result<SpikeTrain> {
    if v.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Usage("rate_encode values must lie in [0,1]".into()));
    }
    let mut train = SpikeTrain::zeros(v.len(), t);
    for (i, &p) in v.iter().enumerate() {
        for tau in 0..t {
            train.set(i, tau, rng.gen::<f64>() < p);
        }
    }
    Ok(train)
}

/// Per-neuron empirical spike rate.
pub fn rate_decode(x: &SpikeTrain) -> Vec<f64> {
    let t = x.t.max(1) as f64;
    (0..x.n_neurons)
        .map(|i| x.row(i).iter().map(|&s| s as f64).sum::<f64>() / t)
        .collect()
}

/// Causal exponential time surface read at the final step:
/// `v_i = sum_tau x[i, tau] * exp(-(T-1-tau)/tau_s)` (unnormalized).
pub fn time_surface_decode(x: &SpikeTrain, tau_s: f64) -> Result<Vec<f64>> {
    if tau_s <= 0.0 {
        return Err(Error::Usage("tau_s must be positive".into()));
    }
    let t = x.t;
    Ok((0..x.n_neurons)
        .map(|i| {
            x.row(i)
                .iter()
                .enumerate()
                .map(|(tau, &s)| s as f64 * (-((t - 1 - tau) as f64) / tau_s).exp())
                .sum()
        })
        .collect())
}

/// Standard basis vector for a class label.
pub fn one_hot(label: usize, n_classes: usize) -> Result<Vec<f64>> {
    if label >= n_classes {
        return Err(Error::Usage(format!("label {} out of range 0..{}", label, n_classes)));
    }
    let mut v = vec![0.0; n_classes];
    v[label] = 1.0;
    Ok(v)
}
