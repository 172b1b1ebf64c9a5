//! The single amortized denoising network: task encoding, input assembly,
//! the network itself, and its checkpoint format.

mod checkpoint;
mod network;
mod task;

use ndarray::{Array2, ArrayView2};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointHeader,
    CHECKPOINT_MAGIC,
};
pub use network::{NetConfig, ScoreNet};
pub use task::{encode_task, ScoreTask, TauVector, VarRole};

use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::systems::VariablePartition;

/// Builds the network input for `task`: clean values where `τ = 0`, the
/// perturbed block where `τ = t`, and fresh standard-normal draws where
/// `τ = T`.
///
/// `perturbed` holds the task's perturbed coordinates in variable order.
pub fn assemble_input(
    clean: ArrayView2<'_, f64>,
    perturbed: ArrayView2<'_, f64>,
    task: &ScoreTask,
    partition: &VariablePartition,
    rng: &mut RngStream,
) -> Result<Array2<f64>> {
    let n = partition.n_vars();
    task.validate(n)?;
    let d = partition.total_dim();
    let rows = clean.nrows();
    let pert_vars = task.perturbed_vars(n);
    let pert_width: usize = pert_vars.iter().map(|&v| partition.dim(v)).sum();
    if clean.ncols() != d || perturbed.ncols() != pert_width || perturbed.nrows() != rows {
        return Err(Error::Shape(format!(
            "assemble_input for {task}: clean {:?} (expected {d} cols), perturbed {:?} (expected {pert_width} cols)",
            clean.dim(),
            perturbed.dim()
        )));
    }
    let mut input = Array2::zeros((rows, d));
    let mut pert_col = 0;
    for v in 0..n {
        let range = partition.range(v);
        match task.role(v) {
            VarRole::Clean => {
                for c in range {
                    input.column_mut(c).assign(&clean.column(c));
                }
            }
            VarRole::Perturbed => {
                for c in range {
                    input.column_mut(c).assign(&perturbed.column(pert_col));
                    pert_col += 1;
                }
            }
            VarRole::Dropped => {
                for r in 0..rows {
                    for c in range.clone() {
                        input[[r, c]] = rng.normal();
                    }
                }
            }
        }
    }
    Ok(input)
}

/// Score from a noise prediction: `s = −ε̂ / σ_t`.
pub fn score_from_eps(eps_hat: &[f64], sigma_t: f64) -> Result<Vec<f64>> {
    if !(sigma_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel std must be positive, got {sigma_t}"
        )));
    }
    Ok(eps_hat.iter().map(|e| -e / sigma_t).collect())
}
