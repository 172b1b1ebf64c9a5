//! Per-variable O-information gradients on a system with one redundant and
//! one synergistic block, using both formulations.
//!
//!     cargo run --release --example gradients

use oinfo::diffusion::DiffusionSchedule;
use oinfo::estimators::{estimate_gradient, GradientFormulation, McOptions};
use oinfo::math::RngStream;
use oinfo::oracle::{self, ExactScores};
use oinfo::systems::{SystemKind, SystemSpec};

fn main() -> oinfo::Result<()> {
    let spec = SystemSpec::new(SystemKind::Mixed {
        blocks: vec![
            SystemKind::Redundant { n_vars: 3, dim: 1, sigma: 0.5 },
            SystemKind::Synergistic { n_vars: 3, dim: 1, sigma: 0.5 },
        ],
    });
    let cov = spec.covariance()?;
    let truth = oracle::gradients(&cov)?;
    let data = spec.generate(10_000, &mut RngStream::new(3, 0))?;
    let src = ExactScores::new(cov, DiffusionSchedule::default())?;
    let opts = McOptions::default();

    println!("{:>3} {:>16} {:>16} {:>8}", "i", "mutual info", "subsystem", "oracle");
    for (i, g) in truth.iter().enumerate() {
        let a = estimate_gradient(&src, i, &data, &opts, GradientFormulation::MutualInformation)?;
        let b = estimate_gradient(&src, i, &data, &opts, GradientFormulation::Subsystem)?;
        println!(
            "{i:>3} {:>8.4} +- {:.4} {:>8.4} +- {:.4} {g:>8.4}",
            a.value, a.std_error, b.value, b.std_error
        );
    }
    Ok(())
}
