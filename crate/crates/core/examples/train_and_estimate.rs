//! Train the shared score network on a benchmark system, save and reload the
//! checkpoint, and estimate with the reloaded model.
//!
//!     cargo run --release --example train_and_estimate [iterations] [redundant|synergistic|cdf]
//!
//! 20000 iterations reproduces the desk-scale runs (about 10 minutes on one
//! core); the default of 3000 gives a rough answer in under two.

use oinfo::estimators::{estimate_oinfo, McOptions};
use oinfo::experiment::{prepare_data, ExperimentConfig};
use oinfo::oracle;
use oinfo::systems::{SystemKind, SystemSpec, Transform};
use oinfo::trainer::{fit_with_progress, TrainConfig, TrainedModel};

fn main() -> oinfo::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3_000);
    let spec = match args.next().as_deref() {
        Some("synergistic") => SystemSpec::new(SystemKind::Synergistic { n_vars: 4, dim: 1, sigma: 0.5 }),
        Some("cdf") => SystemSpec::new(SystemKind::Redundant { n_vars: 3, dim: 1, sigma: 1.0 }).with_transform(Transform::Cdf),
        _ => SystemSpec::new(SystemKind::Redundant { n_vars: 3, dim: 1, sigma: 1.0 }),
    };
    let truth = oracle::measures(&spec.covariance()?)?;

    let mut cfg = ExperimentConfig::for_system(spec);
    cfg.train = TrainConfig {
        n_iterations: iterations,
        ..TrainConfig::conservative()
    };
    let data = prepare_data(&cfg)?;
    let net = cfg.net_config(data.train.total_dim());
    let every = (iterations / 10).max(1);
    let (model, log) = fit_with_progress(&data.train, net, &cfg.train, &cfg.schedule, |e| {
        if e.iteration % every == 0 {
            eprintln!("step {:>6}  loss {:.4}  {:>6.1}s", e.iteration, e.loss, e.wall_time);
        }
    })?;
    let n = log.entries.len();
    eprintln!("mean loss over the last 10%: {:.4}", log.mean_loss(n - n / 10..n));

    let path = std::env::temp_dir().join("oinfo-example-model.ckpt");
    model.save(&path)?;
    let model = TrainedModel::load(&path)?;
    println!("checkpoint {} ({} tasks)", path.display(), model.tasks().len());

    let opts = McOptions {
        seeds: vec![0, 1, 2],
        ..McOptions::default()
    };
    let est = estimate_oinfo(&model, &data.test, &opts)?;
    println!("         estimate          oracle");
    for (name, e, t) in [
        ("tc", &est.tc, truth.tc),
        ("dtc", &est.dtc, truth.dtc),
        ("omega", &est.o_info, truth.o_info),
    ] {
        println!("{name:<6} {:>8.4} +- {:.4}  {t:>8.4}", e.value, e.std_error);
    }
    Ok(())
}
