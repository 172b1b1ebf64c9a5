//! Score-based estimation of O-information and related higher-order
//! information measures (total correlation, dual total correlation,
//! S-information and per-variable O-information gradients).
//!
//! Estimators are written once against [`estimators::ScoreSource`], which is
//! implemented by both a trained denoising network
//! ([`trainer::TrainedModel`]) and the closed-form Gaussian scores of a
//! benchmark system ([`oracle::ExactScores`]).

pub mod data_io;
pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod math;
pub mod oracle;
pub mod score_net;
pub mod systems;
pub mod trainer;

pub use error::{Error, Result};
