//! Data ingestion and synthesis: 8x8 grayscale digits in the optdigits CSV
//! format, pixel-noise corruption, two-class rotated digit tasks for
//! meta-learning, burst/tonic temporal sequences, and binary spike dumps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::snn::SpikeTrain;

pub const IMAGE_PIXELS: usize = 64;
pub const IMAGE_SIDE: usize = 8;

/// One 8x8 grayscale image with pixels in [0,1] and a class label 0-9.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Vec<f64>,
    pub label: usize,
}

/// Spiking modes of the synthetic temporal dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    Burst,
    Tonic,
}

impl SpikeMode {
    /// Periodic template: burst is 5 spikes then 15 silent steps, tonic is
    /// 2 spikes then 10 silent steps.
    pub fn template(&self) -> Vec<u8> {
        match self {
            SpikeMode::Burst => {
                let mut t = vec![1u8; 5];
                t.extend(std::iter::repeat(0).take(15));
                t
            }
            SpikeMode::Tonic => {
                let mut t = vec![1u8; 2];
                t.extend(std::iter::repeat(0).take(10));
                t
            }
        }
    }

    pub fn period(&self) -> usize {
        match self {
            SpikeMode::Burst => 20,
            SpikeMode::Tonic => 12,
        }
    }
}

/// One single-channel temporal example.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalExample {
    pub x: SpikeTrain,
    pub mode: SpikeMode,
}

/// Load an optdigits-format CSV: 65 comma-separated integers per line,
/// 64 pixels in 0-16 followed by the label. Pixels are scaled into [0,1].
pub fn load_digits(path: impl AsRef<Path>) -> Result<Vec<LabeledImage>> {
    let file = File::open(path.as_ref()).map_err(|e| {
        Error::Dataset(format!("cannot open {}: {}", path.as_ref().display(), e))
    })?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != IMAGE_PIXELS + 1 {
            return Err(Error::Parse(format!(
                "line {}: expected 65 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut pixels = Vec::with_capacity(IMAGE_PIXELS);
        for (i, f) in fields[..IMAGE_PIXELS].iter().enumerate() {
            let v: i64 = f.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: field {} is not an integer: {:?}", lineno + 1, i + 1, f))
            })?;
            if !(0..=16).contains(&v) {
                return Err(Error::Parse(format!(
                    "line {}: pixel value {} outside 0-16",
                    lineno + 1,
                    v
                )));
            }
            pixels.push(v as f64 / 16.0);
        }
        let label: usize = fields[IMAGE_PIXELS].trim().parse().map_err(|_| {
            Error::Parse(format!("line {}: bad label {:?}", lineno + 1, fields[IMAGE_PIXELS]))
        })?;
        if label > 9 {
            return Err(Error::Parse(format!("line {}: label {} outside 0-9", lineno + 1, label)));
        }
        out.push(LabeledImage { pixels, label });
    }
    Ok(out)
}

/// Write images back out in the same CSV shape (pixels quantized to 0-16).
pub fn write_digits_csv(path: impl AsRef<Path>, images: &[LabeledImage]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for img in images {
        for p in &img.pixels {
            write!(w, "{},", (p * 16.0).round().clamp(0.0, 16.0) as i64)?;
        }
        writeln!(w, "{}", img.label)?;
    }
    Ok(())
}

/// Perturb `floor(fraction * 64)` distinct random pixels by adding
/// Uniform(0,1) noise, clamped back into [0,1]. The label is preserved.
pub fn corrupt(img: &LabeledImage, fraction: f64, rng: &mut impl Rng) -> Result<LabeledImage> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Usage("corrupt fraction must lie in [0,1]".into()));
    }
    let n = (fraction * IMAGE_PIXELS as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..IMAGE_PIXELS).collect();
    idx.shuffle(rng);
    let mut pixels = img.pixels.clone();
    for &i in idx.iter().take(n) {
        pixels[i] = (pixels[i] + rng.gen::<f64>()).clamp(0.0, 1.0);
    }
    Ok(LabeledImage { pixels, label: img.label })
}

/// Burst/tonic sequences: each example is its mode's periodic template,
/// cyclically shifted by a uniform random phase and truncated to `t`.
/// Modes are drawn with probability 0.5 each.
pub fn make_burst_tonic(n: usize, t: usize, rng: &mut impl Rng) -> Result<Vec<TemporalExample>> {
    if t < SpikeMode::Burst.period() {
        return Err(Error::Usage(format!(
            "t = {} shorter than one full burst period (20)",
            t
        )));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mode = if rng.gen::<bool>() { SpikeMode::Burst } else { SpikeMode::Tonic };
        let phase = rng.gen_range(0..mode.period());
        out.push(TemporalExample { x: mode_sequence(mode, phase, t), mode });
    }
    Ok(out)
}

/// The mode template cyclically shifted by `phase` and tiled to length `t`.
pub fn mode_sequence(mode: SpikeMode, phase: usize, t: usize) -> SpikeTrain {
    let template = mode.template();
    let period = template.len();
    let mut train = SpikeTrain::zeros(1, t);
    for tau in 0..t {
        train.set(0, tau, template[(tau + phase) % period] == 1);
    }
    train
}

/// All-ones single-row exogenous drive.
pub fn step_input(t: usize) -> SpikeTrain {
    SpikeTrain::ones(1, t)
}

/// Square-grid rotation in multiples of 90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn quarter_turns(&self) -> usize {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
        }
    }
}

/// Rotate an 8x8 pixel grid; one quarter turn maps (r, c) to (c, 7-r).
pub fn rotate_pixels(pixels: &[f64], rotation: Rotation) -> Vec<f64> {
    let mut out = pixels.to_vec();
    for _ in 0..rotation.quarter_turns() {
        let prev = out.clone();
        for r in 0..IMAGE_SIDE {
            for c in 0..IMAGE_SIDE {
                out[c * IMAGE_SIDE + (IMAGE_SIDE - 1 - r)] = prev[r * IMAGE_SIDE + c];
            }
        }
    }
    out
}

/// Two-class task: all images of `digit_a` and `digit_b`, rotated by the
/// stated multiple of 90 degrees, labels remapped to {0, 1}.
pub fn make_task(
    digit_a: usize,
    digit_b: usize,
    rotation: Rotation,
    source: &[LabeledImage],
) -> Result<Vec<LabeledImage>> {
    if digit_a == digit_b {
        return Err(Error::Usage("task digits must differ".into()));
    }
    let out: Vec<LabeledImage> = source
        .iter()
        .filter(|img| img.label == digit_a || img.label == digit_b)
        .map(|img| LabeledImage {
            pixels: rotate_pixels(&img.pixels, rotation),
            label: (img.label == digit_b) as usize,
        })
        .collect();
    if !out.iter().any(|i| i.label == 0) || !out.iter().any(|i| i.label == 1) {
        return Err(Error::Dataset(format!(
            "task ({}, {}) has an empty class",
            digit_a, digit_b
        )));
    }
    Ok(out)
}

/// Write spike trains as a binary dump: u32 count, then per train
/// u32 n_neurons, u32 t, packed bits (row-major, LSB first).
pub fn write_spike_dump(path: impl AsRef<Path>, trains: &[SpikeTrain]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(trains.len() as u32).to_le_bytes())?;
    for train in trains {
        w.write_all(&(train.n_neurons as u32).to_le_bytes())?;
        w.write_all(&(train.t as u32).to_le_bytes())?;
        let bits = train.values();
        let mut packed = vec![0u8; (bits.len() + 7) / 8];
        for (i, &b) in bits.iter().enumerate() {
            packed[i / 8] |= b << (i % 8);
        }
        w.write_all(&packed)?;
    }
    Ok(())
}

pub fn read_spike_dump(path: impl AsRef<Path>) -> Result<Vec<SpikeTrain>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let count = u32::from_le_bytes(buf4) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf4)?;
        let n_neurons = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4)?;
        let t = u32::from_le_bytes(buf4) as usize;
        let nbits = n_neurons * t;
        let mut packed = vec![0u8; (nbits + 7) / 8];
        r.read_exact(&mut packed)?;
        let values: Vec<u8> = (0..nbits).map(|i| (packed[i / 8] >> (i % 8)) & 1).collect();
        out.push(SpikeTrain::from_values(n_neurons, t, &values)?);
    }
    Ok(out)
}
