//! Numeric substrate: dense matrices, seeded random streams, and parameter
//! optimization.

mod matrix;
mod optim;
mod rng;

pub use matrix::{regression_coefficients, schur_conditional, Matrix, PD_JITTER, PD_TOLERANCE};
pub use optim::{AdamConfig, AdamState, ParamStore};
pub use rng::RngStream;

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mean and standard error of the mean; the error is 0 for fewer than two values.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
