//! How the error of the exact-score estimate shrinks with the number of time
//! draws per row, for uniform and importance-sampled times.
//!
//!     cargo run --release --example mc_steps_ablation [repetitions]

use oinfo::diffusion::{DiffusionSchedule, TimeSampling};
use oinfo::estimators::{estimate_oinfo, McOptions};
use oinfo::math::RngStream;
use oinfo::oracle::{self, ExactScores};
use oinfo::systems::{SystemKind, SystemSpec};

fn main() -> oinfo::Result<()> {
    let reps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(51);
    let spec = SystemSpec::new(SystemKind::Redundant { n_vars: 3, dim: 1, sigma: 1.0 });
    let cov = spec.covariance()?;
    let truth = oracle::measures(&cov)?.o_info;
    let src = ExactScores::new(cov, DiffusionSchedule::default())?;
    let data: Vec<_> = (0..reps)
        .map(|r| spec.generate(1_000, &mut RngStream::new(r, 9)))
        .collect::<Result<_, _>>()?;

    println!("median |omega_hat - omega| over {reps} repetitions of 1000 rows");
    for ts in [TimeSampling::Uniform, TimeSampling::Importance] {
        let mut line = format!("{ts:?}:");
        for k in [5, 10, 20, 40, 80] {
            let mut errs = Vec::new();
            for (r, d) in data.iter().enumerate() {
                let opts = McOptions {
                    mc_steps: k,
                    seeds: vec![r as u64],
                    time_sampling: ts,
                    ..McOptions::default()
                };
                errs.push((estimate_oinfo(&src, d, &opts)?.o_info.value - truth).abs());
            }
            errs.sort_by(f64::total_cmp);
            line += &format!("  K={k}: {:.4}", errs[errs.len() / 2]);
        }
        println!("{line}");
    }
    Ok(())
}
