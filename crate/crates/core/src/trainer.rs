//! Randomized multi-task denoising score matching: one network learns every
//! score the requested measures need.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{DiffusionSchedule, TimeSampler, TimeSampling};
use crate::error::{Error, Result};
use crate::estimators::ScoreSource;
use crate::math::{AdamConfig, AdamState, RngStream};
use crate::score_net::{
    assemble_input, encode_task, read_checkpoint, write_checkpoint, CheckpointHeader, NetConfig, ScoreNet, ScoreTask,
};
use crate::systems::{Dataset, VariablePartition};

/// Which family of tasks the network is trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    /// Joint, conditional-on-rest and marginal scores: `2N + 1` tasks.
    #[default]
    Standard,
    /// Adds `Xⁱ | X^{\{i,j\}}` for every ordered pair.
    WithGradients,
    /// Adds the sub-joint scores on top of the gradient tasks, so that every
    /// `Ω(X^{\i})` can be estimated directly.
    WithSubsystems,
}

impl TaskMode {
    pub fn needs_gradients(self) -> bool {
        self != TaskMode::Standard
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_iterations: usize,
    pub ema_decay: f64,
    pub task_mode: TaskMode,
    pub time_sampling: TimeSampling,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            learning_rate: 1e-2,
            n_iterations: 20_000,
            ema_decay: 0.999,
            task_mode: TaskMode::Standard,
            time_sampling: TimeSampling::Importance,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The lower learning rate preset.
    pub fn conservative() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "ema_decay must lie in [0, 1), got {}",
                self.ema_decay
            )));
        }
        Ok(())
    }
}

/// Tasks needed for `n_vars` variables under `mode`, in a fixed order.
pub fn required_tasks(n_vars: usize, mode: TaskMode) -> Result<Vec<ScoreTask>> {
    if n_vars < 2 {
        return Err(Error::InvalidArgument(format!(
            "score training needs at least 2 variables, got {n_vars}"
        )));
    }
    let mut tasks = vec![ScoreTask::Joint];
    tasks.extend((0..n_vars).map(|i| ScoreTask::conditional_on_rest(i, n_vars)));
    tasks.extend((0..n_vars).map(|i| ScoreTask::Marginal { target: i }));
    if mode.needs_gradients() {
        for i in 0..n_vars {
            for j in (0..n_vars).filter(|&j| j != i) {
                let task = ScoreTask::conditional(i, (0..n_vars).filter(|&v| v != i && v != j))?;
                if !tasks.contains(&task) {
                    tasks.push(task);
                }
            }
        }
    }
    if mode == TaskMode::WithSubsystems {
        tasks.extend((0..n_vars).map(|dropped| ScoreTask::SubJoint { dropped }));
    }
    Ok(tasks)
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub task: String,
    pub loss: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
}

impl TrainingLog {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io("<training log>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Mean loss over a window of entries.
    pub fn mean_loss(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.entries[range];
        slice.iter().map(|e| e.loss).sum::<f64>() / slice.len() as f64
    }
}

/// Everything one optimization step needs besides the network.
pub struct StepContext<'a> {
    pub data: &'a Dataset,
    pub schedule: &'a DiffusionSchedule,
    pub sampler: &'a TimeSampler,
    pub batch_size: usize,
}

/// Noise-regression loss of `net` for `task` on the rows `idx`, with times
/// and noise drawn from `rng`. Returns `(input, tau, target, mask, mean t)`.
fn build_batch(
    ctx: &StepContext<'_>,
    task: &ScoreTask,
    idx: &[usize],
    rng: &mut RngStream,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, Vec<usize>, f64)> {
    let p = &ctx.data.partition;
    let n = p.n_vars();
    let clean = ctx.data.samples.select(Axis(0), idx);
    let rows = idx.len();
    let (t, _) = ctx.sampler.sample_many(rows, rng);
    let coords = p.coords(&task.perturbed_vars(n));
    let eps = rng.normal_matrix(rows, coords.len());
    let mut perturbed = clean.select(Axis(1), &coords);
    for (r, &tr) in t.iter().enumerate() {
        let k = ctx.schedule.coeffs(tr)?;
        for c in 0..coords.len() {
            perturbed[[r, c]] = k.alpha * perturbed[[r, c]] + k.sigma * eps[[r, c]];
        }
    }
    let input = assemble_input(clean.view(), perturbed.view(), task, p, rng)?;
    let tau = tau_matrix(task, &t, n, ctx.schedule.t_max)?;
    let mut target = Array2::zeros(input.raw_dim());
    for (k, &c) in coords.iter().enumerate() {
        target.column_mut(c).assign(&eps.column(k));
    }
    let mean_t = t.iter().sum::<f64>() / rows.max(1) as f64;
    Ok((input, tau, target, coords, mean_t))
}

fn tau_matrix(task: &ScoreTask, t: &[f64], n_vars: usize, t_max: f64) -> Result<Array2<f64>> {
    let mut tau = Array2::zeros((t.len(), n_vars));
    for (r, &tr) in t.iter().enumerate() {
        let row = encode_task(task, tr, n_vars, t_max)?;
        for (v, x) in row.0.into_iter().enumerate() {
            tau[[r, v]] = x;
        }
    }
    Ok(tau)
}

/// One Adam step on a fresh batch for `task`. Returns the pre-update loss.
pub fn training_step(
    net: &mut ScoreNet,
    optimizer: &mut AdamState,
    ctx: &StepContext<'_>,
    task: &ScoreTask,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let m = ctx.data.n_samples();
    if m == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let idx: Vec<usize> = (0..ctx.batch_size).map(|_| rng.below(m)).collect();
    let (input, tau, target, mask, mean_t) = build_batch(ctx, task, &idx, rng)?;
    let loss = net.loss_and_backward(input.view(), tau.view(), target.view(), &mask)?;
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged {
            iteration,
            task: task.to_string(),
            t: mean_t,
            loss,
        });
    }
    optimizer.step(net.params_mut())?;
    Ok(loss)
}

/// Shuffled round-robin task order: every block of `tasks.len()` steps visits
/// each task exactly once.
fn task_for_step(tasks: &[ScoreTask], base: &RngStream, iteration: usize) -> usize {
    let k = tasks.len();
    let epoch = iteration / k;
    let mut order: Vec<usize> = (0..k).collect();
    base.substream(0x7a5c_0000 + epoch as u64).shuffle(&mut order);
    order[iteration % k]
}

/// Trains a fresh network on `data` (assumed standardized).
pub fn fit(
    data: &Dataset,
    net_config: NetConfig,
    config: &TrainConfig,
    schedule: &DiffusionSchedule,
) -> Result<(TrainedModel, TrainingLog)> {
    fit_with_progress(data, net_config, config, schedule, |_| {})
}

/// As [`fit`], calling `progress` after every step.
pub fn fit_with_progress(
    data: &Dataset,
    net_config: NetConfig,
    config: &TrainConfig,
    schedule: &DiffusionSchedule,
    mut progress: impl FnMut(&LogEntry),
) -> Result<(TrainedModel, TrainingLog)> {
    config.validate()?;
    schedule.validate()?;
    net_config.validate()?;
    let p = data.partition.clone();
    let tasks = required_tasks(p.n_vars(), config.task_mode)?;
    let base = RngStream::new(config.seed, 0x7e41);
    let mut net = ScoreNet::new(net_config, &p, *schedule, &mut base.substream(1))?;
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ema_decay: config.ema_decay,
        ..AdamConfig::default()
    };
    let mut optimizer = AdamState::new(net.params(), adam)?;
    let sampler = TimeSampler::new(*schedule, config.time_sampling)?;
    let ctx = StepContext {
        data,
        schedule,
        sampler: &sampler,
        batch_size: config.batch_size,
    };
    let start = Instant::now();
    let mut log = TrainingLog::default();
    for it in 0..config.n_iterations {
        let task = &tasks[task_for_step(&tasks, &base, it)];
        let mut rng = base.substream(0x1_0000_0000 + it as u64);
        let loss = training_step(&mut net, &mut optimizer, &ctx, task, it, &mut rng)?;
        let entry = LogEntry {
            iteration: it,
            task: task.to_string(),
            loss,
            wall_time: start.elapsed().as_secs_f64(),
        };
        progress(&entry);
        log.entries.push(entry);
    }
    let last = net.params().values().to_vec();
    let inference = net.with_values(optimizer.ema().to_vec())?;
    let model = TrainedModel {
        net: inference,
        last_params: last,
        schedule: *schedule,
        tasks,
        config: config.clone(),
        config_hash: config_hash(&(config, &net_config, schedule, &p))?,
        partition: p,
    };
    Ok((model, log))
}

/// A trained network serving the scores it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Network holding the moving-average weights used for inference.
    net: ScoreNet,
    /// Raw weights after the final optimizer step (not persisted).
    last_params: Vec<Array2<f64>>,
    schedule: DiffusionSchedule,
    partition: VariablePartition,
    tasks: Vec<ScoreTask>,
    config: TrainConfig,
    config_hash: String,
}

impl TrainedModel {
    pub fn net(&self) -> &ScoreNet {
        &self.net
    }

    pub fn ema_params(&self) -> &[Array2<f64>] {
        self.net.params().values()
    }

    /// Weights after the last optimizer step, if this model came from
    /// [`fit`] rather than a checkpoint.
    pub fn last_params(&self) -> &[Array2<f64>] {
        &self.last_params
    }

    pub fn tasks(&self) -> &[ScoreTask] {
        &self.tasks
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn header(&self) -> Result<CheckpointHeader> {
        let ps = self.net.params();
        Ok(CheckpointHeader {
            net: *self.net.config(),
            schedule: self.schedule,
            partition: self.partition.clone(),
            tasks: self.tasks.clone(),
            train_config_hash: self.config_hash.clone(),
            train_config: serde_json::to_value(&self.config)?,
            ema: true,
            param_names: ps.names().to_vec(),
            param_shapes: ps.values().iter().map(|v| [v.nrows(), v.ncols()]).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_checkpoint(path, &self.header()?, self.net.params().values())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        crate::score_net::encode_checkpoint(&mut buf, &self.header()?, self.net.params().values())?;
        Ok(buf)
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let (header, params) = read_checkpoint(path)?;
        Self::from_parts(header, params)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
        let (header, params) = crate::score_net::decode_checkpoint(bytes)?;
        Self::from_parts(header, params)
    }

    fn from_parts(header: CheckpointHeader, params: Vec<Array2<f64>>) -> Result<TrainedModel> {
        let p = header.partition;
        let mut rng = RngStream::new(0, 0);
        let net = ScoreNet::new(header.net, &p, header.schedule, &mut rng)?;
        if net.params().names() != header.param_names.as_slice() {
            return Err(Error::Format("checkpoint parameter names do not match the network layout".into()));
        }
        let net = net.with_values(params)?;
        let config: TrainConfig = serde_json::from_value(header.train_config)?;
        Ok(TrainedModel {
            net,
            last_params: Vec::new(),
            schedule: header.schedule,
            tasks: header.tasks,
            config,
            config_hash: header.train_config_hash,
            partition: p,
        })
    }

    /// Per-coordinate standard deviation of the marginal score of `target`
    /// across `n_refills` independent noise fills of the other variables,
    /// at fixed perturbed values and time.
    pub fn marginal_fill_spread(
        &self,
        target: usize,
        perturbed: &[f64],
        t: f64,
        n_refills: usize,
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        let d = self.partition.total_dim();
        let task = ScoreTask::Marginal { target };
        let pert = Array2::from_shape_fn((n_refills, perturbed.len()), |(_, c)| perturbed[c]);
        let clean = Array2::zeros((n_refills, d));
        let scores = self.scores(&task, clean.view(), pert.view(), &vec![t; n_refills], rng)?;
        Ok(scores
            .columns()
            .into_iter()
            .map(|c| {
                let mean = c.mean().unwrap_or(0.0);
                (c.mapv(|v| (v - mean).powi(2)).sum() / (n_refills.max(2) - 1) as f64).sqrt()
            })
            .collect())
    }
}

impl ScoreSource for TrainedModel {
    fn partition(&self) -> &VariablePartition {
        &self.partition
    }

    fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    fn supports(&self, task: &ScoreTask) -> bool {
        self.tasks.contains(task)
    }

    fn kind(&self) -> &'static str {
        "trained"
    }

    fn scores(
        &self,
        task: &ScoreTask,
        clean: ArrayView2<'_, f64>,
        perturbed: ArrayView2<'_, f64>,
        t: &[f64],
        rng: &mut RngStream,
    ) -> Result<Array2<f64>> {
        if !self.supports(task) {
            return Err(Error::MissingTask(task.to_string()));
        }
        let p = &self.partition;
        let n = p.n_vars();
        if t.len() != perturbed.nrows() {
            return Err(Error::Shape(format!("{} times for {} rows", t.len(), perturbed.nrows())));
        }
        let input = assemble_input(clean, perturbed, task, p, rng)?;
        let tau = tau_matrix(task, t, n, self.schedule.t_max)?;
        let eps = self.net.forward(input.view(), tau.view())?;
        let coords = p.coords(&task.perturbed_vars(n));
        let mut out = eps.select(Axis(1), &coords);
        for (r, &tr) in t.iter().enumerate() {
            let sigma = self.schedule.coeffs(tr)?.sigma;
            out.row_mut(r).mapv_inplace(|e| -e / sigma);
        }
        Ok(out)
    }
}
