use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oinfo::data_io::PayloadFormat;
use oinfo::diffusion::TimeSampling;
use oinfo::estimators::GradientFormulation;
use oinfo::experiment::{
    cmd_estimate, cmd_gen, cmd_grad, cmd_oracle, cmd_sweep, cmd_train, write_sweep_csv, ExperimentConfig,
    ScoreChoice, OUTPUT_DIR_ENV,
};
use oinfo::systems::{SystemKind, SystemSpec, Transform};
use oinfo::{Error, Result};

/// Score-based estimation of O-information and related measures.
#[derive(Parser)]
#[command(name = "oinfo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form ground truth for a benchmark system.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: SystemArgs,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a benchmark system into a dataset file.
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        /// Dataset header path (the payload is written next to it).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::F64le)]
        format: Format,
    },
    /// Train the score network; writes model.ckpt and training_log.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Estimate TC, DTC, S-information and O-information.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        est: EstimateArgs,
    },
    /// Estimate the per-variable O-information gradients.
    Grad {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long, value_enum)]
        formulation: Option<Formulation>,
    },
    /// Run a benchmark grid and write a long-format CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Seed for data generation, training and estimation.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, default_value_t = 3)]
    n_vars: usize,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = TransformArg::None)]
    transform: TransformArg,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Trained model checkpoint.
    #[arg(long, conflicts_with = "exact_scores")]
    checkpoint: Option<PathBuf>,
    /// Use closed-form Gaussian scores of the configured system.
    #[arg(long)]
    exact_scores: bool,
    #[arg(long)]
    mc_steps: Option<usize>,
    /// Comma-separated estimation seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, value_enum)]
    time_sampling: Option<Sampling>,
    /// Report path (default: <output-dir>/report.json or grad.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Independent,
    Redundant,
    Synergistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    None,
    HalfCube,
    Cdf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    F32le,
    F64le,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Uniform,
    Importance,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formulation {
    MutualInformation,
    Subsystem,
}

fn load_config(common: &Common, system: Option<&SystemArgs>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(spec) = system.and_then(SystemArgs::spec) {
        cfg.system = Some(spec);
        cfg.dataset = None;
    }
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    if let Some(seed) = common.seed {
        cfg.data.seed = seed;
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

impl SystemArgs {
    fn spec(&self) -> Option<SystemSpec> {
        let (n_vars, dim, sigma) = (self.n_vars, self.dim, self.sigma);
        let kind = match self.kind? {
            Kind::Independent => SystemKind::Independent { n_vars, dim },
            Kind::Redundant => SystemKind::Redundant { n_vars, dim, sigma },
            Kind::Synergistic => SystemKind::Synergistic { n_vars, dim, sigma },
        };
        let transform = match self.transform {
            TransformArg::None => Transform::None,
            TransformArg::HalfCube => Transform::HalfCube,
            TransformArg::Cdf => Transform::Cdf,
        };
        Some(SystemSpec::new(kind).with_transform(transform))
    }
}

fn apply_estimate_args(cfg: &mut ExperimentConfig, a: &EstimateArgs) -> Result<ScoreChoice> {
    if let Some(m) = a.mc_steps {
        cfg.estimate.mc_steps = m;
    }
    if let Some(s) = &a.seeds {
        cfg.estimate.seeds = s.clone();
    }
    if let Some(n) = a.n_test {
        cfg.data.n_test = n;
    }
    if let Some(ts) = a.time_sampling {
        cfg.estimate.time_sampling = match ts {
            Sampling::Uniform => TimeSampling::Uniform,
            Sampling::Importance => TimeSampling::Importance,
        };
    }
    match (&a.checkpoint, a.exact_scores) {
        (Some(p), false) => Ok(ScoreChoice::Checkpoint(p.clone())),
        (None, true) => Ok(ScoreChoice::Exact),
        _ => Err(Error::Config("pass either --checkpoint <path> or --exact-scores".into())),
    }
}

fn emit(json: String, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(path, json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Oracle { common, system, out } => {
            let cfg = load_config(&common, Some(&system))?;
            let spec = cfg
                .system
                .ok_or_else(|| Error::Config("give --kind or a config with a [system] section".into()))?;
            let report = cmd_oracle(&spec)?;
            emit(serde_json::to_string_pretty(&report)? + "\n", out.as_ref())
        }
        Command::Gen {
            common,
            system,
            n_samples,
            out,
            format,
        } => {
            let cfg = load_config(&common, Some(&system))?;
            let spec = cfg
                .system
                .ok_or_else(|| Error::Config("give --kind or a config with a [system] section".into()))?;
            let format = match format {
                Format::Csv => PayloadFormat::Csv,
                Format::F32le => PayloadFormat::F32le,
                Format::F64le => PayloadFormat::F64le,
            };
            let data = cmd_gen(&spec, n_samples, cfg.data.seed, &out, format)?;
            eprintln!("wrote {} rows x {} columns to {}", data.n_samples(), data.total_dim(), out.display());
            Ok(())
        }
        Command::Train { common, system, train } => {
            let mut cfg = load_config(&common, Some(&system))?;
            if let Some(v) = train.iterations {
                cfg.train.n_iterations = v;
            }
            if let Some(v) = train.learning_rate {
                cfg.train.learning_rate = v;
            }
            if let Some(v) = train.batch_size {
                cfg.train.batch_size = v;
            }
            if let Some(v) = train.n_train {
                cfg.data.n_train = v;
            }
            let (_, out) = cmd_train(&cfg)?;
            eprintln!(
                "final loss {:.4}; wrote {} and {}",
                out.final_loss,
                out.checkpoint.display(),
                out.log.display()
            );
            Ok(())
        }
        Command::Estimate { common, system, est } => {
            let mut cfg = load_config(&common, Some(&system))?;
            let scores = apply_estimate_args(&mut cfg, &est)?;
            let report = cmd_estimate(&cfg, &scores)?;
            let out = est.out.unwrap_or_else(|| cfg.output_dir().join("report.json"));
            emit(report.to_json()?, Some(&out))
        }
        Command::Grad {
            common,
            system,
            est,
            formulation,
        } => {
            let mut cfg = load_config(&common, Some(&system))?;
            let scores = apply_estimate_args(&mut cfg, &est)?;
            if let Some(f) = formulation {
                cfg.estimate.gradient_formulation = match f {
                    Formulation::MutualInformation => GradientFormulation::MutualInformation,
                    Formulation::Subsystem => GradientFormulation::Subsystem,
                };
            }
            let report = cmd_grad(&cfg, &scores)?;
            let out = est.out.unwrap_or_else(|| cfg.output_dir().join("grad.json"));
            emit(report.to_json()?, Some(&out))
        }
        Command::Sweep { common, out } => {
            let cfg = load_config(&common, None)?;
            let rows = cmd_sweep(&cfg, |r| {
                eprintln!(
                    "{} dim={} sigma={:.3} seed={} {}: o_hat={:.4} o_true={:.4}",
                    r.benchmark, r.dim, r.sigma, r.seed, r.estimator, r.o_hat, r.o_true
                )
            })?;
            let out = out.unwrap_or_else(|| cfg.output_dir().join("sweep.csv"));
            write_sweep_csv(&rows, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
