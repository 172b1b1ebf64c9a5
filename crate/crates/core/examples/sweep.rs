//! A benchmark sweep over the noise level with exact scores, written as a
//! long-format CSV.
//!
//!     cargo run --release --example sweep [out.csv]

use oinfo::experiment::{cmd_sweep, write_sweep_csv, ExperimentConfig, SweepConfig};
use oinfo::systems::log_spaced;

fn main() -> oinfo::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("oinfo-sweep.csv"));
    let mut cfg = ExperimentConfig::default();
    cfg.data.n_test = 5_000;
    cfg.sweep = Some(SweepConfig {
        benchmark: "synergistic".into(),
        n_vars: 4,
        sigmas: log_spaced(0.1, 2.0, 6),
        seeds: vec![0, 1],
        ..SweepConfig::default()
    });
    let rows = cmd_sweep(&cfg, |r| {
        println!(
            "sigma {:.3} seed {}: omega_hat {:>8.4}  omega {:>8.4}",
            r.sigma, r.seed, r.o_hat, r.o_true
        )
    })?;
    write_sweep_csv(&rows, &out)?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}
