//! Experiment configuration and the end-to-end commands behind the CLI:
//! ground truth, data generation, training, estimation, gradients and sweeps.
//!
//! Every command is deterministic given its configuration; reports carry the
//! fully resolved configuration and its hash, and no timestamps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data_io::{self, PayloadFormat};
use crate::diffusion::{DiffusionSchedule, TimeSampling};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_gradient, estimate_oinfo, GradientFormulation, McOptions, MeasureEstimate, OInfoEstimate, ScoreSource,
};
use crate::math::RngStream;
use crate::oracle::{self, ExactScores, MeasureSet};
use crate::score_net::NetConfig;
use crate::systems::{default_sigma_grid, CovarianceMatrix, Dataset, SystemKind, SystemSpec, Transform, VariablePartition};
use crate::trainer::{config_hash, fit, TrainConfig, TrainedModel};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "OINFO_OUTPUT_DIR";

/// Where samples come from and how many to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Rows drawn for training (benchmark systems only).
    pub n_train: usize,
    /// Rows drawn for estimation (benchmark systems only).
    pub n_test: usize,
    /// Fraction of a loaded dataset used for training.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_train: 50_000,
            n_test: 10_000,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

/// An external dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub path: PathBuf,
    #[serde(default)]
    pub partition: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub mc_steps: usize,
    pub seeds: Vec<u64>,
    pub time_sampling: TimeSampling,
    pub stratified: bool,
    pub chunk_size: usize,
    pub gradient_formulation: GradientFormulation,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        let mc = McOptions::default();
        EstimateConfig {
            mc_steps: mc.mc_steps,
            seeds: mc.seeds,
            time_sampling: mc.time_sampling,
            stratified: mc.stratified,
            chunk_size: mc.chunk_size,
            gradient_formulation: GradientFormulation::default(),
        }
    }
}

impl EstimateConfig {
    pub fn mc_options(&self) -> McOptions {
        McOptions {
            mc_steps: self.mc_steps,
            seeds: self.seeds.clone(),
            time_sampling: self.time_sampling,
            stratified: self.stratified,
            chunk_size: self.chunk_size,
        }
    }
}

/// Parameter grid for [`cmd_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `redundant`, `synergistic` or `independent`.
    pub benchmark: String,
    pub n_vars: usize,
    pub dims: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `exact` and/or `trained`.
    pub estimators: Vec<String>,
    /// Ablation axes; empty means "use the main configuration's value".
    pub mc_steps: Vec<usize>,
    pub n_samples: Vec<usize>,
    pub n_iterations: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            benchmark: "redundant".into(),
            n_vars: 3,
            dims: vec![1],
            sigmas: default_sigma_grid(),
            seeds: (0..5).collect(),
            estimators: vec!["exact".into()],
            mc_steps: Vec::new(),
            n_samples: Vec::new(),
            n_iterations: Vec::new(),
        }
    }
}

/// A full experiment: one data source plus network, training, estimation and
/// schedule settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: Option<SystemSpec>,
    pub dataset: Option<DatasetSource>,
    pub data: DataConfig,
    /// Derived from the data dimension when absent.
    pub net: Option<NetConfig>,
    pub train: TrainConfig,
    pub estimate: EstimateConfig,
    pub schedule: DiffusionSchedule,
    pub sweep: Option<SweepConfig>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn for_system(spec: SystemSpec) -> Self {
        ExperimentConfig {
            system: Some(spec),
            ..ExperimentConfig::default()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the source choice and all nested settings.
    pub fn validate(&self) -> Result<()> {
        match (&self.system, &self.dataset) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a system or a dataset, not both".into()));
            }
            (None, Some(d)) if !d.path.exists() => {
                return Err(Error::Config(format!("dataset {} does not exist", d.path.display())));
            }
            _ => {}
        }
        self.train.validate()?;
        self.schedule.validate()?;
        self.estimate.mc_options().validate()?;
        if let Some(net) = &self.net {
            net.validate()?;
        }
        Ok(())
    }

    /// Output directory: the configured one, else `$OINFO_OUTPUT_DIR`, else
    /// `oinfo-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("oinfo-out"))
    }

    pub fn net_config(&self, total_dim: usize) -> NetConfig {
        self.net
            .unwrap_or_else(|| NetConfig::for_dimension(total_dim, self.train.task_mode.needs_gradients()))
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }
}

/// Training and estimation data for an experiment, with the ground truth
/// when the source is a benchmark system.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub covariance: Option<CovarianceMatrix>,
    pub transform: Transform,
}

/// Draws or loads the experiment's data. Untransformed benchmark samples are
/// used as drawn (unit variance by construction); transformed and external
/// data are standardized with the training split's moments.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    if let Some(spec) = &cfg.system {
        let cov = spec.covariance()?;
        let base = RngStream::new(cfg.data.seed, 0xda7a);
        let train = spec.generate(cfg.data.n_train, &mut base.substream(1))?;
        let test = spec.generate(cfg.data.n_test, &mut base.substream(2))?;
        let (train, test) = if spec.transform == Transform::None {
            (train, test)
        } else {
            standardize_pair(&train, &test)?
        };
        return Ok(PreparedData {
            train,
            test,
            covariance: Some(cov),
            transform: spec.transform,
        });
    }
    let src = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("configuration needs a [system] or [dataset] section".into()))?;
    let partition = src.partition.clone().map(VariablePartition::new).transpose()?;
    let raw = data_io::load(&src.path, partition)?;
    let raw = data_io::unstandardize(&raw)?;
    let (train, test) = data_io::split(&raw, cfg.data.train_fraction, &mut RngStream::new(cfg.data.seed, 0x5911))?;
    let (train, test) = standardize_pair(&train, &test)?;
    Ok(PreparedData {
        train,
        test,
        covariance: None,
        transform: Transform::None,
    })
}

fn standardize_pair(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    let (train, record) = data_io::standardize(train)?;
    let test = data_io::apply_standardization(test, &record)?;
    Ok((train, test))
}

/// Ground truth for a benchmark system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub system: SystemSpec,
    pub measures: MeasureSet,
    /// Per-variable gradients `∂ᵢΩ`; empty for fewer than 3 variables.
    pub gradients: Vec<f64>,
    /// Measures of each top-level block (one entry unless mixed).
    pub blocks: Vec<MeasureSet>,
}

pub fn cmd_oracle(spec: &SystemSpec) -> Result<OracleReport> {
    let cov = spec.covariance()?;
    let measures = oracle::measures(&cov)?;
    let gradients = if cov.n_vars() >= 3 {
        oracle::gradients(&cov)?
    } else {
        Vec::new()
    };
    let blocks = spec
        .kind
        .block_vars()
        .into_iter()
        .map(|r| oracle::measures(&cov.subsystem(&r.collect::<Vec<_>>())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        system: spec.clone(),
        measures,
        gradients,
        blocks,
    })
}

/// Samples `n_samples` rows from `spec` and writes them as a dataset file.
pub fn cmd_gen(spec: &SystemSpec, n_samples: usize, seed: u64, out: &Path, format: PayloadFormat) -> Result<Dataset> {
    let data = spec.generate(n_samples, &mut RngStream::new(seed, 0xda7a))?;
    ensure_parent(out)?;
    data_io::save(&data, out, format, None)?;
    Ok(data)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Files written by [`cmd_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub final_loss: f64,
}

/// Trains on the experiment's training split; writes `model.ckpt` and
/// `training_log.csv` into the output directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(TrainedModel, TrainOutputs)> {
    let data = prepare_data(cfg)?;
    let net = cfg.net_config(data.train.total_dim());
    let (model, log) = fit(&data.train, net, &cfg.train, &cfg.schedule)?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let checkpoint = dir.join("model.ckpt");
    let log_path = dir.join("training_log.csv");
    model.save(&checkpoint)?;
    log.save(&log_path)?;
    let n = log.entries.len();
    let final_loss = if n == 0 { f64::NAN } else { log.mean_loss(n.saturating_sub(100)..n) };
    Ok((
        model,
        TrainOutputs {
            checkpoint,
            log: log_path,
            final_loss,
        },
    ))
}

/// Which scores an estimate uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreChoice {
    /// Closed-form Gaussian scores of the configured system.
    Exact,
    Checkpoint(PathBuf),
}

/// One measure with its Monte-Carlo error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueWithError {
    pub value: f64,
    pub std_error: f64,
}

impl From<&MeasureEstimate> for ValueWithError {
    fn from(m: &MeasureEstimate) -> Self {
        ValueWithError {
            value: m.value,
            std_error: m.std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeasures {
    pub tc: ValueWithError,
    pub dtc: ValueWithError,
    pub s: ValueWithError,
    pub o_info: ValueWithError,
}

impl From<&OInfoEstimate> for ReportMeasures {
    fn from(e: &OInfoEstimate) -> Self {
        ReportMeasures {
            tc: (&e.tc).into(),
            dtc: (&e.dtc).into(),
            s: (&e.s_info).into(),
            o_info: (&e.o_info).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub variable: usize,
    pub value: f64,
    pub std_error: f64,
    /// Ground truth when the data come from a benchmark system.
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub n_samples: usize,
    pub mc_steps: usize,
    pub seeds: Vec<u64>,
    pub time_sampling: TimeSampling,
    pub schedule: DiffusionSchedule,
    pub source_kind: String,
    pub config_hash: String,
    /// Training configuration hash of the checkpoint, if one was used.
    pub model_hash: Option<String>,
    pub config: ExperimentConfig,
}

/// Estimation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub measures: Option<ReportMeasures>,
    pub gradients: Vec<GradientEntry>,
    /// Ground truth when the data come from an untransformed or transformed
    /// benchmark system (the transforms leave every measure unchanged).
    pub oracle: Option<MeasureSet>,
    pub meta: ReportMeta,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

fn load_source(cfg: &ExperimentConfig, data: &PreparedData, scores: &ScoreChoice) -> Result<Box<dyn ScoreSource>> {
    match scores {
        ScoreChoice::Exact => {
            let cov = data
                .covariance
                .clone()
                .ok_or_else(|| Error::Config("exact scores need a [system] section".into()))?;
            if data.transform != Transform::None {
                return Err(Error::Config(
                    "exact scores describe the Gaussian system; they cannot score transformed samples".into(),
                ));
            }
            Ok(Box::new(ExactScores::new(cov, cfg.schedule)?))
        }
        ScoreChoice::Checkpoint(path) => {
            let model = TrainedModel::load(path)?;
            if model.partition() != &data.test.partition {
                return Err(Error::Config(format!(
                    "checkpoint partition {:?} does not match the data partition {:?}",
                    model.partition().dims(),
                    data.test.partition.dims()
                )));
            }
            Ok(Box::new(model))
        }
    }
}

fn meta(cfg: &ExperimentConfig, data: &PreparedData, source: &dyn ScoreSource, scores: &ScoreChoice) -> Result<ReportMeta> {
    let model_hash = match scores {
        ScoreChoice::Checkpoint(path) => Some(TrainedModel::load(path)?.config_hash().to_string()),
        ScoreChoice::Exact => None,
    };
    Ok(ReportMeta {
        n_samples: data.test.n_samples(),
        mc_steps: cfg.estimate.mc_steps,
        seeds: cfg.estimate.seeds.clone(),
        time_sampling: cfg.estimate.time_sampling,
        schedule: *source.schedule(),
        source_kind: source.kind().to_string(),
        config_hash: cfg.hash()?,
        model_hash,
        config: cfg.clone(),
    })
}

/// TC, DTC, S-information and O-information on the estimation split.
pub fn cmd_estimate(cfg: &ExperimentConfig, scores: &ScoreChoice) -> Result<Report> {
    let data = prepare_data(cfg)?;
    let source = load_source(cfg, &data, scores)?;
    let est = estimate_oinfo(source.as_ref(), &data.test, &cfg.estimate.mc_options())?;
    let truth = data.covariance.as_ref().map(oracle::measures).transpose()?;
    Ok(Report {
        measures: Some((&est).into()),
        gradients: Vec::new(),
        oracle: truth,
        meta: meta(cfg, &data, source.as_ref(), scores)?,
    })
}

/// Per-variable O-information gradients on the estimation split.
pub fn cmd_grad(cfg: &ExperimentConfig, scores: &ScoreChoice) -> Result<Report> {
    let data = prepare_data(cfg)?;
    let source = load_source(cfg, &data, scores)?;
    let opts = cfg.estimate.mc_options();
    let truth = data.covariance.as_ref().map(oracle::gradients).transpose()?;
    let gradients = (0..data.test.partition.n_vars())
        .map(|i| {
            let g = estimate_gradient(source.as_ref(), i, &data.test, &opts, cfg.estimate.gradient_formulation)?;
            Ok(GradientEntry {
                variable: i,
                value: g.value,
                std_error: g.std_error,
                oracle: truth.as_ref().map(|t| t[i]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        measures: None,
        gradients,
        oracle: data.covariance.as_ref().map(oracle::measures).transpose()?,
        meta: meta(cfg, &data, source.as_ref(), scores)?,
    })
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub benchmark: String,
    pub n_vars: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
    pub estimator: String,
    pub tc_hat: f64,
    pub dtc_hat: f64,
    pub s_hat: f64,
    pub o_hat: f64,
    pub tc_true: f64,
    pub dtc_true: f64,
    pub o_true: f64,
    pub wall_time: f64,
    pub mc_steps: usize,
    pub n_samples: usize,
    pub n_iterations: usize,
}

fn sweep_kind(benchmark: &str, n_vars: usize, dim: usize, sigma: f64) -> Result<SystemKind> {
    match benchmark {
        "redundant" => Ok(SystemKind::Redundant { n_vars, dim, sigma }),
        "synergistic" => Ok(SystemKind::Synergistic { n_vars, dim, sigma }),
        "independent" => Ok(SystemKind::Independent { n_vars, dim }),
        other => Err(Error::Config(format!(
            "unknown sweep benchmark {other:?} (expected redundant, synergistic or independent)"
        ))),
    }
}

/// Runs every cell of the sweep grid. Each cell uses its own seed for data,
/// training and estimation; `progress` sees each finished row.
pub fn cmd_sweep(cfg: &ExperimentConfig, mut progress: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.clone().unwrap_or_default();
    for e in &sweep.estimators {
        if e != "exact" && e != "trained" {
            return Err(Error::Config(format!("unknown sweep estimator {e:?} (expected exact or trained)")));
        }
    }
    let or_default = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
    let mc_grid = or_default(&sweep.mc_steps, cfg.estimate.mc_steps);
    let n_grid = or_default(&sweep.n_samples, cfg.data.n_test);
    let it_grid = or_default(&sweep.n_iterations, cfg.train.n_iterations);
    let mut rows = Vec::new();
    for &dim in &sweep.dims {
        for &sigma in &sweep.sigmas {
            let spec = SystemSpec::new(sweep_kind(&sweep.benchmark, sweep.n_vars, dim, sigma)?);
            let truth = oracle::measures(&spec.covariance()?)?;
            for &seed in &sweep.seeds {
                for &n_samples in &n_grid {
                    for estimator in &sweep.estimators {
                        let its: &[usize] = if estimator == "trained" { &it_grid } else { &[0] };
                        for &n_iterations in its {
                            let mut cell = cfg.clone();
                            cell.system = Some(spec.clone());
                            cell.dataset = None;
                            cell.sweep = None;
                            cell.data.seed = seed;
                            cell.data.n_test = n_samples;
                            cell.train.seed = seed;
                            cell.train.n_iterations = n_iterations;
                            let start = Instant::now();
                            let data = prepare_data(&cell)?;
                            let trained;
                            let exact;
                            let source: &dyn ScoreSource = if estimator == "trained" {
                                let net = cell.net_config(data.train.total_dim());
                                trained = fit(&data.train, net, &cell.train, &cell.schedule)?.0;
                                &trained
                            } else {
                                exact = ExactScores::new(spec.covariance()?, cell.schedule)?;
                                &exact
                            };
                            for &mc_steps in &mc_grid {
                                let opts = McOptions {
                                    mc_steps,
                                    seeds: vec![seed],
                                    ..cell.estimate.mc_options()
                                };
                                let est = estimate_oinfo(source, &data.test, &opts)?;
                                let row = SweepRow {
                                    benchmark: sweep.benchmark.clone(),
                                    n_vars: sweep.n_vars,
                                    dim,
                                    sigma,
                                    seed,
                                    estimator: estimator.clone(),
                                    tc_hat: est.tc.value,
                                    dtc_hat: est.dtc.value,
                                    s_hat: est.s_info.value,
                                    o_hat: est.o_info.value,
                                    tc_true: truth.tc,
                                    dtc_true: truth.dtc,
                                    o_true: truth.o_info,
                                    wall_time: start.elapsed().as_secs_f64(),
                                    mc_steps,
                                    n_samples,
                                    n_iterations,
                                };
                                progress(&row);
                                rows.push(row);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn redundant3() -> SystemSpec {
        SystemSpec::new(SystemKind::Redundant {
            n_vars: 3,
            dim: 1,
            sigma: 1.0,
        })
    }

    #[test]
    fn oracle_report_values() {
        let r = cmd_oracle(&redundant3()).unwrap();
        assert!((r.measures.o_info - 0.0850).abs() < 1e-4);
        assert_eq!(r.gradients.len(), 3);
        let id = cmd_oracle(&SystemSpec::new(SystemKind::Independent { n_vars: 3, dim: 2 })).unwrap();
        assert!(id.measures.tc.abs() < 1e-12 && id.measures.o_info.abs() < 1e-12);
        let mixed = SystemSpec::new(SystemKind::Mixed {
            blocks: vec![
                redundant3().kind,
                SystemKind::Synergistic {
                    n_vars: 3,
                    dim: 1,
                    sigma: 0.5,
                },
            ],
        });
        let m = cmd_oracle(&mixed).unwrap();
        assert_eq!(m.blocks.len(), 2);
        let sum = m.blocks[0].o_info + m.blocks[1].o_info;
        assert!((m.measures.o_info - sum).abs() < 1e-10);
    }

    #[test]
    fn config_toml_round_trip_and_validation() {
        let text = r#"
            output_dir = "out"
            [system]
            kind = "redundant"
            n_vars = 3
            dim = 1
            sigma = 1.0
            [train]
            n_iterations = 100
            learning_rate = 1e-3
            [estimate]
            mc_steps = 4
            seeds = [1, 2]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.train.n_iterations, 100);
        assert_eq!(cfg.train.batch_size, 256);
        assert_eq!(cfg.estimate.seeds, vec![1, 2]);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(ExperimentConfig::from_toml("[train]\nbogus = 1").is_err());
        let both = ExperimentConfig {
            dataset: Some(DatasetSource {
                path: "x.csv".into(),
                partition: None,
            }),
            ..cfg
        };
        assert!(both.validate().is_err());
    }

    #[test]
    fn exact_estimate_is_deterministic_and_close() {
        let mut cfg = ExperimentConfig::for_system(redundant3());
        cfg.data.n_test = 2000;
        cfg.estimate.seeds = vec![0, 1];
        let a = cmd_estimate(&cfg, &ScoreChoice::Exact).unwrap();
        let b = cmd_estimate(&cfg, &ScoreChoice::Exact).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let m = a.measures.unwrap();
        assert!((m.o_info.value - 0.085).abs() < 0.03, "{m:?}");
        assert_eq!(a.meta.source_kind, "exact");
    }

    #[test]
    fn missing_checkpoint_is_an_error() {
        let cfg = ExperimentConfig::for_system(redundant3());
        let err = cmd_estimate(&cfg, &ScoreChoice::Checkpoint("/nonexistent/model.ckpt".into())).unwrap_err();
        assert_ne!(err.exit_code(), 0);
    }

    #[test]
    fn exact_scores_refuse_transformed_samples() {
        let mut cfg = ExperimentConfig::for_system(redundant3().with_transform(Transform::Cdf));
        cfg.data.n_train = 100;
        cfg.data.n_test = 100;
        assert!(matches!(cmd_estimate(&cfg, &ScoreChoice::Exact), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_row_count() {
        let mut cfg = ExperimentConfig::default();
        cfg.data.n_test = 50;
        cfg.estimate.mc_steps = 1;
        cfg.sweep = Some(SweepConfig {
            dims: vec![1, 2],
            seeds: (0..5).collect(),
            ..SweepConfig::default()
        });
        let rows = cmd_sweep(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 80);
        let truth = cmd_oracle(&SystemSpec::new(SystemKind::Redundant {
            n_vars: 3,
            dim: 2,
            sigma: rows[8 * 5].sigma,
        }))
        .unwrap();
        assert_eq!(rows[8 * 5].dim, 2);
        assert_eq!(rows[8 * 5].o_true, truth.measures.o_info);
    }
}
