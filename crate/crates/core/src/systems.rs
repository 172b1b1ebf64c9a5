//! Synthetic Gaussian benchmark systems with known higher-order structure,
//! dataset sampling, and MI-invariant marginal transforms.

use std::ops::Range;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{normal_cdf, Matrix, RngStream, PD_TOLERANCE};

/// How a flat `D`-dimensional sample splits into `N` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct VariablePartition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl VariablePartition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("partition needs at least one variable".into()));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("variable {i} has dimension 0")));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(VariablePartition { dims, offsets })
    }

    /// `n_vars` variables of `dim` dimensions each.
    pub fn uniform(n_vars: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; n_vars])
    }

    pub fn n_vars(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, var: usize) -> usize {
        self.dims[var]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().expect("non-empty")
    }

    pub fn range(&self, var: usize) -> Range<usize> {
        self.offsets[var]..self.offsets[var + 1]
    }

    /// Flat coordinate indices of the listed variables, in listing order.
    pub fn coords(&self, vars: &[usize]) -> Vec<usize> {
        vars.iter().flat_map(|&v| self.range(v)).collect()
    }

    pub fn all_vars(&self) -> Vec<usize> {
        (0..self.n_vars()).collect()
    }

    pub fn others(&self, exclude: &[usize]) -> Vec<usize> {
        (0..self.n_vars()).filter(|v| !exclude.contains(v)).collect()
    }

    /// Partition of the sub-system made of `vars` (in that order).
    pub fn select(&self, vars: &[usize]) -> Result<VariablePartition> {
        VariablePartition::new(vars.iter().map(|&v| self.dims[v]).collect())
    }

    pub fn concat(parts: &[VariablePartition]) -> Result<VariablePartition> {
        VariablePartition::new(parts.iter().flat_map(|p| p.dims.iter().copied()).collect())
    }

    pub fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.n_vars() {
            return Err(Error::IndexSet(format!(
                "variable {var} out of range for {} variables",
                self.n_vars()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for VariablePartition {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        VariablePartition::new(dims)
    }
}

impl From<VariablePartition> for Vec<usize> {
    fn from(p: VariablePartition) -> Self {
        p.dims
    }
}

/// Covariance of a zero-mean Gaussian system together with its variable
/// partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub matrix: Matrix,
    pub partition: VariablePartition,
}

impl CovarianceMatrix {
    pub fn new(matrix: Matrix, partition: VariablePartition) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != partition.total_dim() {
            return Err(Error::Shape(format!(
                "{}x{} covariance does not match partition of total dimension {}",
                matrix.rows(),
                matrix.cols(),
                partition.total_dim()
            )));
        }
        if matrix.max_asymmetry() > 1e-12 {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        Ok(CovarianceMatrix { matrix, partition })
    }

    pub fn identity(partition: VariablePartition) -> Self {
        let d = partition.total_dim();
        CovarianceMatrix {
            matrix: Matrix::identity(d),
            partition,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.partition.n_vars()
    }

    /// Covariance of the sub-system made of `vars`.
    pub fn subsystem(&self, vars: &[usize]) -> Result<CovarianceMatrix> {
        let coords = self.partition.coords(vars);
        Ok(CovarianceMatrix {
            matrix: self.matrix.select(&coords, &coords),
            partition: self.partition.select(vars)?,
        })
    }

    fn check_pd(self) -> Result<Self> {
        let min_eigenvalue = self.matrix.min_eigenvalue()?;
        if !(min_eigenvalue > PD_TOLERANCE) {
            return Err(Error::NotPositiveDefiniteSpectrum { min_eigenvalue });
        }
        Ok(self)
    }
}

/// Elementwise strictly monotone transform applied to sampled data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    /// `x ↦ x·√|x|`, lengthens the tails.
    HalfCube,
    /// `x ↦ Φ(x)`, uniformizes the margins.
    Cdf,
}

impl Transform {
    pub fn apply_scalar(self, x: f64) -> f64 {
        match self {
            Transform::None => x,
            Transform::HalfCube => x * x.abs().sqrt(),
            Transform::Cdf => normal_cdf(x),
        }
    }
}

/// Benchmark family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    /// Identity covariance; every measure is zero.
    Independent { n_vars: usize, dim: usize },
    /// Shared redundant component with per-variable noise of scale `sigma`.
    Redundant { n_vars: usize, dim: usize, sigma: f64 },
    /// Markov-chain synergy: the second variable couples to all others.
    Synergistic { n_vars: usize, dim: usize, sigma: f64 },
    /// Independent sub-systems stacked block-diagonally.
    Mixed { blocks: Vec<SystemKind> },
}

impl SystemKind {
    pub fn covariance(&self) -> Result<CovarianceMatrix> {
        match *self {
            SystemKind::Independent { n_vars, dim } => {
                Ok(CovarianceMatrix::identity(VariablePartition::uniform(n_vars, dim)?))
            }
            SystemKind::Redundant { n_vars, dim, sigma } => build_redundant_cov(n_vars, dim, sigma),
            SystemKind::Synergistic { n_vars, dim, sigma } => {
                build_synergistic_cov(n_vars, dim, sigma)
            }
            SystemKind::Mixed { ref blocks } => {
                let covs = blocks
                    .iter()
                    .map(SystemKind::covariance)
                    .collect::<Result<Vec<_>>>()?;
                build_mixed_cov(&covs)
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        match self {
            SystemKind::Independent { n_vars, .. }
            | SystemKind::Redundant { n_vars, .. }
            | SystemKind::Synergistic { n_vars, .. } => *n_vars,
            SystemKind::Mixed { blocks } => blocks.iter().map(SystemKind::n_vars).sum(),
        }
    }

    /// Variable index ranges of the top-level blocks (a single range unless mixed).
    pub fn block_vars(&self) -> Vec<Range<usize>> {
        match self {
            SystemKind::Mixed { blocks } => {
                let mut start = 0;
                blocks
                    .iter()
                    .map(|b| {
                        let r = start..start + b.n_vars();
                        start = r.end;
                        r
                    })
                    .collect()
            }
            other => vec![0..other.n_vars()],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SystemKind::Independent { .. } => "independent",
            SystemKind::Redundant { .. } => "redundant",
            SystemKind::Synergistic { .. } => "synergistic",
            SystemKind::Mixed { .. } => "mixed",
        }
    }
}

/// A benchmark system plus the transform applied to its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    #[serde(flatten)]
    pub kind: SystemKind,
    #[serde(default)]
    pub transform: Transform,
}

impl SystemSpec {
    pub fn new(kind: SystemKind) -> Self {
        SystemSpec {
            kind,
            transform: Transform::None,
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    pub fn covariance(&self) -> Result<CovarianceMatrix> {
        self.kind.covariance()
    }

    /// Draws `n_samples` rows and applies the configured transform.
    pub fn generate(&self, n_samples: usize, rng: &mut RngStream) -> Result<Dataset> {
        let cov = self.covariance()?;
        let data = sample(&cov, n_samples, rng)?;
        Ok(apply_transform(&data, self.transform))
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Interaction-noise grid used by sweeps: 8 log-spaced points on `[0.1, 10]`.
pub fn default_sigma_grid() -> Vec<f64> {
    log_spaced(0.1, 10.0, 8)
}

/// Equicorrelated block covariance: identity blocks on the diagonal, `ρ·I`
/// off the diagonal, with `ρ = 1/(1+σ²)`.
pub fn build_redundant_cov(n_vars: usize, dim: usize, sigma: f64) -> Result<CovarianceMatrix> {
    if n_vars < 2 {
        return Err(Error::InvalidArgument(format!(
            "redundant system needs at least 2 variables, got {n_vars}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("variable dimension must be >= 1".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::SingularSystem(format!(
            "redundant system requires sigma > 0 (got {sigma}); sigma = 0 makes all variables identical"
        )));
    }
    let rho = 1.0 / (1.0 + sigma * sigma);
    let partition = VariablePartition::uniform(n_vars, dim)?;
    let d = partition.total_dim();
    let mut m = Matrix::identity(d);
    for a in 0..n_vars {
        for b in 0..n_vars {
            if a != b {
                for k in 0..dim {
                    m.set(a * dim + k, b * dim + k, rho);
                }
            }
        }
    }
    CovarianceMatrix::new(m, partition)?.check_pd()
}

/// Couplings of the synergy benchmark: `(X¹–X², X²–Xⁱ for i ≥ 3)`, i.e.
/// `1/√(N−1)` and `ρ/√(N−1)` with `ρ = 1/√(1+σ²)`.
pub fn synergistic_couplings(n_vars: usize, sigma: f64) -> (f64, f64) {
    let scale = 1.0 / ((n_vars - 1) as f64).sqrt();
    let rho = 1.0 / (1.0 + sigma * sigma).sqrt();
    (scale, rho * scale)
}

/// Covariance of the synergy benchmark (variables 0 and 1 are `X¹`, `X²`).
///
/// This is the standardized law of `X² = X¹ + S₁ + … + S_{N−2}`,
/// `Xⁱ = S_{i−2} + σ·εᵢ`. At `σ = 0` the system is deterministic and the
/// construction fails the positive-definiteness check.
pub fn build_synergistic_cov(n_vars: usize, dim: usize, sigma: f64) -> Result<CovarianceMatrix> {
    if n_vars < 3 {
        return Err(Error::InvalidArgument(format!(
            "synergistic system needs at least 3 variables, got {n_vars}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("variable dimension must be >= 1".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let (c12, c2i) = synergistic_couplings(n_vars, sigma);
    let partition = VariablePartition::uniform(n_vars, dim)?;
    let mut m = Matrix::identity(partition.total_dim());
    let mut couple = |a: usize, b: usize, v: f64| {
        for k in 0..dim {
            m.set(a * dim + k, b * dim + k, v);
            m.set(b * dim + k, a * dim + k, v);
        }
    };
    couple(0, 1, c12);
    for i in 2..n_vars {
        couple(1, i, c2i);
    }
    CovarianceMatrix::new(m, partition)?.check_pd()
}

/// Block-diagonal assembly of independent sub-systems.
pub fn build_mixed_cov(blocks: &[CovarianceMatrix]) -> Result<CovarianceMatrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("mixed system needs at least one block".into()));
    }
    let partition = VariablePartition::concat(
        &blocks.iter().map(|b| b.partition.clone()).collect::<Vec<_>>(),
    )?;
    let mut m = Array2::zeros((partition.total_dim(), partition.total_dim()));
    let mut at = 0;
    for b in blocks {
        let n = b.matrix.rows();
        m.slice_mut(s![at..at + n, at..at + n]).assign(b.matrix.as_array());
        at += n;
    }
    CovarianceMatrix::new(Matrix::from_array(m), partition)
}

/// Per-dimension affine standardization `x ↦ (x − mean)/scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Sample matrix (rows are samples) with its variable partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Array2<f64>,
    pub partition: VariablePartition,
    /// Standardization already applied to `samples`, if any.
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(samples: Array2<f64>, partition: VariablePartition) -> Result<Self> {
        if samples.ncols() != partition.total_dim() {
            return Err(Error::Shape(format!(
                "dataset has {} columns but partition covers {}",
                samples.ncols(),
                partition.total_dim()
            )));
        }
        if let Some((idx, _)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "dataset value at row {}, column {}",
                idx.0, idx.1
            )));
        }
        Ok(Dataset {
            samples,
            partition,
            standardization: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn total_dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    /// Rows at the given indices, in order.
    pub fn rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: self.samples.select(Axis(0), idx),
            partition: self.partition.clone(),
            standardization: self.standardization.clone(),
        }
    }

    /// Keeps only the listed variables (columns reordered accordingly).
    pub fn select_vars(&self, vars: &[usize]) -> Result<Dataset> {
        let coords = self.partition.coords(vars);
        Ok(Dataset {
            samples: self.samples.select(Axis(1), &coords),
            partition: self.partition.select(vars)?,
            standardization: None,
        })
    }

    /// Empirical covariance (divides by `M`).
    pub fn empirical_covariance(&self) -> Matrix {
        let m = self.n_samples().max(1) as f64;
        let mean = self.samples.mean_axis(Axis(0)).unwrap_or_else(|| {
            ndarray::Array1::zeros(self.total_dim())
        });
        let centered = &self.samples - &mean;
        Matrix::from_array(centered.t().dot(&centered) / m)
    }
}

/// Draws `x = L·z` with `z ~ N(0, I)` and `L` the Cholesky factor of `cov`.
pub fn sample(cov: &CovarianceMatrix, n_samples: usize, rng: &mut RngStream) -> Result<Dataset> {
    let l = cov.matrix.cholesky_jittered()?;
    let z = rng.normal_matrix(n_samples, cov.partition.total_dim());
    let x = z.dot(&l.as_array().t());
    Dataset::new(x, cov.partition.clone())
}

/// Applies an elementwise transform; the partition is unchanged.
pub fn apply_transform(data: &Dataset, transform: Transform) -> Dataset {
    Dataset {
        samples: data.samples.mapv(|x| transform.apply_scalar(x)),
        partition: data.partition.clone(),
        standardization: None,
    }
}
