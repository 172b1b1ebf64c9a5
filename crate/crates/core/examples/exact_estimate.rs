//! Estimate all four measures with closed-form Gaussian scores in place of a
//! trained network. This isolates the Monte-Carlo estimator from training.
//!
//!     cargo run --release --example exact_estimate

use oinfo::diffusion::DiffusionSchedule;
use oinfo::estimators::{estimate_oinfo, McOptions};
use oinfo::math::RngStream;
use oinfo::oracle::{self, ExactScores};
use oinfo::systems::{SystemKind, SystemSpec};

fn main() -> oinfo::Result<()> {
    let opts = McOptions::default();
    for kind in [
        SystemKind::Redundant { n_vars: 3, dim: 1, sigma: 1.0 },
        SystemKind::Redundant { n_vars: 6, dim: 5, sigma: 2.0 },
        SystemKind::Synergistic { n_vars: 4, dim: 1, sigma: 0.1 },
    ] {
        let spec = SystemSpec::new(kind);
        let cov = spec.covariance()?;
        let truth = oracle::measures(&cov)?;
        let data = spec.generate(10_000, &mut RngStream::new(0, 1))?;
        let est = estimate_oinfo(&ExactScores::new(cov, DiffusionSchedule::default())?, &data, &opts)?;
        println!("{:?}", spec.kind);
        for (name, e, t) in [
            ("tc", &est.tc, truth.tc),
            ("dtc", &est.dtc, truth.dtc),
            ("s", &est.s_info, truth.s_info),
            ("omega", &est.o_info, truth.o_info),
        ] {
            println!("  {name:<6} {:>8.4} +- {:.4}   oracle {t:.4}", e.value, e.std_error);
        }
    }
    Ok(())
}
