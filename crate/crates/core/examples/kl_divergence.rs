//! The score-difference identity on two textbook cases: the KL divergence
//! between unit Gaussians one apart, and the mutual information of a
//! correlated pair.
//!
//!     cargo run --release --example kl_divergence

use oinfo::diffusion::{DiffusionSchedule, TimeSampling};
use oinfo::estimators::{estimate_mi, kl_divergence, McOptions};
use oinfo::math::{Matrix, RngStream};
use oinfo::oracle::{ExactScores, NoisedGaussian};
use oinfo::systems::{sample, CovarianceMatrix, VariablePartition};

fn main() -> oinfo::Result<()> {
    let s = DiffusionSchedule::default();
    let p = NoisedGaussian::new(vec![0.0], &Matrix::identity(1), s)?;
    let q = NoisedGaussian::new(vec![1.0], &Matrix::identity(1), s)?;
    let draws = sample(
        &CovarianceMatrix::identity(VariablePartition::uniform(1, 1)?),
        10_000,
        &mut RngStream::new(1, 0),
    )?;
    for ts in [TimeSampling::Uniform, TimeSampling::Importance] {
        let opts = McOptions {
            time_sampling: ts,
            ..McOptions::default()
        };
        let kl = kl_divergence(&p, &q, &draws, &s, &opts)?;
        println!("KL, {ts:?} times: {:.4} +- {:.4} (exact 0.5)", kl.value, kl.std_error);
    }

    for rho in [0.1, 0.5, 0.9] {
        let mut m = Matrix::identity(2);
        m.set(0, 1, rho);
        m.set(1, 0, rho);
        let cov = CovarianceMatrix::new(m, VariablePartition::uniform(2, 1)?)?;
        let data = sample(&cov, 10_000, &mut RngStream::new(2, 0))?;
        let mi = estimate_mi(&ExactScores::new(cov, s)?, 0, &[1], &data, &McOptions::default())?;
        let exact = -0.5 * (1.0 - rho * rho).ln();
        println!("MI rho={rho}: {:.4} +- {:.4} (exact {exact:.4})", mi.value, mi.std_error);
    }
    Ok(())
}
