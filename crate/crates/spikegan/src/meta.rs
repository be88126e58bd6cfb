//! Continual meta-learning: a stream of tasks arrives one at a time, a
//! task-serving model adapts from a shared initialization on the growing
//! task buffer, and the initialization itself is improved with first-order
//! Reptile steps using data from completed tasks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::snn::{SnnParams, SnnTopology, SpikeTrain};
use crate::tensor::AnnParams;
use crate::training::{spikegan_step, DiscEncoding, GanStepMetrics, TrainConfig};

pub type Example = (SpikeTrain, SpikeTrain);

/// The shared initialization: generator and discriminator parameters that
/// every task adaptation starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub gen: SnnParams,
    pub disc: AnnParams,
}

impl HyperParams {
    /// Component-wise `self + rate * (target - self)`; the Reptile
    /// interpolation applied to both networks at once.
    pub fn lerp_toward(&self, target: &HyperParams, rate: f64) -> Result<HyperParams> {
        let mut gen = self.gen.clone();
        let gen_flat: Vec<f64> = self
            .gen
            .to_flat()
            .iter()
            .zip(target.gen.to_flat())
            .map(|(a, b)| a + rate * (b - a))
            .collect();
        gen.set_flat(&gen_flat)?;
        let mut disc = self.disc.clone();
        let disc_flat: Vec<f64> = self
            .disc
            .to_flat()
            .iter()
            .zip(target.disc.to_flat())
            .map(|(a, b)| a + rate * (b - a))
            .collect();
        disc.set_flat(&disc_flat)?;
        Ok(HyperParams { gen, disc })
    }
}

/// Ordered record of every batch observed so far in the current task.
/// Append-only; starts empty.
#[derive(Debug, Clone, Default)]
pub struct TaskDataBuffer {
    examples: Vec<Example>,
    batches: usize,
}

impl TaskDataBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_batch(&mut self, batch: &[Example]) {
        self.examples.extend_from_slice(batch);
        self.batches += 1;
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }
}

/// Archive of completed tasks' final buffers.
#[derive(Debug, Clone, Default)]
pub struct MetaDataBuffer {
    tasks: Vec<Vec<Example>>,
}

impl MetaDataBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn archive(&mut self, task: TaskDataBuffer) {
        self.tasks.push(task.examples);
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, idx: usize) -> &[Example] {
        &self.tasks[idx]
    }
}

fn sample_batch(pool: &[Example], size: usize, rng: &mut impl Rng) -> Vec<Example> {
    (0..size).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
}

/// Adapt fresh generator/discriminator copies from `init` with `k_steps`
/// adversarial steps over batches drawn from the buffer. Returns the adapted
/// pair and the per-step metrics; `init` is untouched.
pub fn within_task_update(
    init: &HyperParams,
    data: &TaskDataBuffer,
    topology: &SnnTopology,
    encoding: DiscEncoding,
    k_steps: usize,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<(HyperParams, Vec<GanStepMetrics>)> {
    if data.is_empty() {
        return Err(Error::Usage("within-task update requires a non-empty buffer".into()));
    }
    let mut adapted = init.clone();
    let mut metrics = Vec::with_capacity(k_steps);
    for _ in 0..k_steps {
        let batch = sample_batch(data.examples(), cfg.batch, rng);
        metrics.push(spikegan_step(
            &mut adapted.gen,
            &mut adapted.disc,
            topology,
            &batch,
            encoding,
            cfg,
            rng,
        )?);
    }
    Ok((adapted, metrics))
}

/// One first-order Reptile step: adapt from `hp` on `n` datasets of `m`
/// examples sampled from completed tasks, then move `hp` toward the mean
/// adapted parameters by `mu_meta`. An empty meta buffer (first task) skips
/// the update.
#[allow(clippy::too_many_arguments)]
pub fn meta_update(
    hp: &HyperParams,
    meta_buf: &MetaDataBuffer,
    topology: &SnnTopology,
    encoding: DiscEncoding,
    n: usize,
    m: usize,
    k_steps: usize,
    mu_meta: f64,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<HyperParams> {
    if meta_buf.is_empty() {
        return Ok(hp.clone());
    }
    if n == 0 || m == 0 {
        return Err(Error::Usage("meta update needs n >= 1 and m >= 1".into()));
    }
    let mut gen_mean = vec![0.0; hp.gen.n_params()];
    let mut disc_mean = vec![0.0; hp.disc.n_params()];
    for _ in 0..n {
        // tasks sampled with replacement; fewer than n stored tasks is fine
        let task = meta_buf.task(rng.gen_range(0..meta_buf.n_tasks()));
        let mut data = TaskDataBuffer::new();
        data.push_batch(&sample_batch(task, m, rng));
        let (adapted, _) =
            within_task_update(hp, &data, topology, encoding, k_steps, cfg, rng)?;
        for (acc, v) in gen_mean.iter_mut().zip(adapted.gen.to_flat()) {
            *acc += v / n as f64;
        }
        for (acc, v) in disc_mean.iter_mut().zip(adapted.disc.to_flat()) {
            *acc += v / n as f64;
        }
    }
    let mut mean = hp.clone();
    mean.gen.set_flat(&gen_mean)?;
    mean.disc.set_flat(&disc_mean)?;
    hp.lerp_toward(&mean, mu_meta)
}

/// Shape of one continual run.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinualSchedule {
    /// meta-time steps (tasks)
    pub tasks: usize,
    /// within-task time steps (batches) per task
    pub batches_per_task: usize,
    /// examples per streamed batch
    pub batch_size: usize,
    /// datasets per meta update
    pub n: usize,
    /// examples per meta dataset
    pub m: usize,
    /// adversarial steps per within-task / meta adaptation
    pub k_steps: usize,
    pub mu_meta: f64,
}

/// One row of the continual metrics log.
#[derive(Debug, Clone)]
pub struct ContinualLogRow {
    pub t: usize,
    pub i: usize,
    pub task_id: usize,
    pub within_task_iters: usize,
    /// populated when the evaluator chose to run at this step
    pub trts_accuracy: Option<f64>,
    pub mean_d_real: f64,
    pub mean_d_synth: f64,
}

impl ContinualLogRow {
    pub fn csv_header() -> &'static str {
        "t,i,task_id,within_task_iters,trts_accuracy,mean_d_real,mean_d_synth"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.i,
            self.task_id,
            self.within_task_iters,
            self.trts_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            self.mean_d_real,
            self.mean_d_synth
        )
    }
}

/// Drive the full online-within-online loop: per (t, i) a batch is appended
/// to the task buffer, the task-serving model re-adapts from the shared
/// initialization, and the initialization takes a Reptile step from the meta
/// buffer. Completed task buffers are archived. Returns per-task snapshots
/// of the initialization and the metrics log.
///
/// `task_source(t, rng)` yields `(task_id, data pool)` for meta-time `t`.
/// `evaluator(hp, adapted, t, i)` may return a TRTS score for the log.
#[allow(clippy::too_many_arguments)]
pub fn run_continual<R: Rng>(
    hp0: HyperParams,
    topology: &SnnTopology,
    encoding: DiscEncoding,
    mut task_source: impl FnMut(usize, &mut R) -> Result<(usize, Vec<Example>)>,
    mut evaluator: impl FnMut(&HyperParams, &HyperParams, usize, usize) -> Result<Option<f64>>,
    schedule: &ContinualSchedule,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(Vec<HyperParams>, Vec<ContinualLogRow>)> {
    let mut hp = hp0;
    let mut meta_buf = MetaDataBuffer::new();
    let mut snapshots = Vec::with_capacity(schedule.tasks);
    let mut log = Vec::new();
    let mut batch_cfg = cfg.clone();
    batch_cfg.batch = schedule.batch_size;
    for t in 0..schedule.tasks {
        let (task_id, pool) = task_source(t, rng)?;
        if pool.is_empty() {
            return Err(Error::Dataset(format!("task {} provided no data", task_id)));
        }
        let mut task_buf = TaskDataBuffer::new();
        for i in 0..schedule.batches_per_task {
            task_buf.push_batch(&sample_batch(&pool, schedule.batch_size, rng));
            debug_assert_eq!(task_buf.len(), (i + 1) * schedule.batch_size);
            let (adapted, metrics) = within_task_update(
                &hp,
                &task_buf,
                topology,
                encoding,
                schedule.k_steps,
                &batch_cfg,
                rng,
            )?;
            hp = meta_update(
                &hp,
                &meta_buf,
                topology,
                encoding,
                schedule.n,
                schedule.m,
                schedule.k_steps,
                schedule.mu_meta,
                &batch_cfg,
                rng,
            )?;
            let last = metrics.last();
            log.push(ContinualLogRow {
                t,
                i,
                task_id,
                within_task_iters: schedule.k_steps,
                trts_accuracy: evaluator(&hp, &adapted, t, i)?,
                mean_d_real: last.map(|m| m.mean_d_real).unwrap_or(f64::NAN),
                mean_d_synth: last.map(|m| m.mean_d_synth).unwrap_or(f64::NAN),
            });
        }
        meta_buf.archive(task_buf);
        snapshots.push(hp.clone());
    }
    Ok((snapshots, log))
}
