use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot}, value {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("covariance is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefiniteSpectrum { min_eigenvalue: f64 },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid index set: {0}")]
    IndexSet(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside schedule range [{t_min}, {t_max}]")]
    TimeOutOfRange { t: f64, t_min: f64, t_max: f64 },

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at iteration {iteration} (task {task}, t = {t:.4e}): loss = {loss}")]
    TrainingDiverged {
        iteration: usize,
        task: String,
        t: f64,
        loss: f64,
    },

    #[error("score task {0} is not available from this source")]
    MissingTask(String),

    #[error("constant column {column}: standard deviation {std:.3e}")]
    ConstantColumn { column: usize, std: f64 },

    #[error("dataset format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// An I/O error tagged with the path involved.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for configuration/input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NotPositiveDefiniteSpectrum { .. }
            | Error::SingularSystem(_)
            | Error::NonFiniteGradient(_)
            | Error::NonFinite(_)
            | Error::TrainingDiverged { .. } => 3,
            _ => 2,
        }
    }
}
