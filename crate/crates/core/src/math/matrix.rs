//! Small dense linear algebra on `f64` used for covariances and Gaussian
//! closed forms.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot threshold below which a matrix is rejected as not positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;
/// Diagonal jitter added once before giving up on a Cholesky factorization.
pub const PD_JITTER: f64 = 1e-8;

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix(Array2<f64>);

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(Array2::zeros((rows, cols)))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(Array2::eye(n))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Matrix(Array2::from_diag(&ArrayView1::from(diag)))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {bad}")));
        }
        Ok(Matrix(
            Array2::from_shape_vec((rows, cols), entries).expect("shape checked"),
        ))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn from_array(a: Array2<f64>) -> Self {
        Matrix(a.as_standard_layout().into_owned())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[[r, c]]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.0[[r, c]] = v;
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_array(self.0.t().to_owned())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols() != other.rows() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Matrix(self.0.dot(&other.0)))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    /// Sub-matrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Array2::zeros((rows.len(), cols.len()));
        for (a, &r) in rows.iter().enumerate() {
            for (b, &c) in cols.iter().enumerate() {
                out[[a, b]] = self.0[[r, c]];
            }
        }
        Matrix(out)
    }

    /// Lower-triangular Cholesky factor `L` with `L·Lᵀ = self`.
    ///
    /// Fails with the index of the first pivot that drops below
    /// [`PD_TOLERANCE`].
    pub fn cholesky(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "cholesky of non-square {}x{} matrix",
                self.rows(),
                self.cols()
            )));
        }
        let n = self.rows();
        let a = &self.0;
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !(diag > PD_TOLERANCE) {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: diag,
                });
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        Ok(Matrix(l))
    }

    /// Cholesky with a single `PD_JITTER·I` retry for nearly singular input.
    pub fn cholesky_jittered(&self) -> Result<Matrix> {
        match self.cholesky() {
            Ok(l) => Ok(l),
            Err(Error::NotPositiveDefinite { .. }) => {
                let mut jittered = self.clone();
                for i in 0..self.rows() {
                    jittered.0[[i, i]] += PD_JITTER;
                }
                jittered.cholesky()
            }
            Err(e) => Err(e),
        }
    }

    /// `log det` through the Cholesky diagonal.
    pub fn logdet(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok(2.0 * l.0.diag().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Solves `self · X = rhs` for symmetric positive definite `self`.
    pub fn solve_spd(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.rows() != self.rows() {
            return Err(Error::Shape(format!(
                "rhs has {} rows, system has {}",
                rhs.rows(),
                self.rows()
            )));
        }
        let l = self.cholesky()?;
        let n = self.rows();
        let mut x = rhs.0.clone();
        for c in 0..rhs.cols() {
            // forward: L y = b
            for i in 0..n {
                let mut s = x[[i, c]];
                for k in 0..i {
                    s -= l.0[[i, k]] * x[[k, c]];
                }
                x[[i, c]] = s / l.0[[i, i]];
            }
            // backward: Lᵀ x = y
            for i in (0..n).rev() {
                let mut s = x[[i, c]];
                for k in (i + 1)..n {
                    s -= l.0[[k, i]] * x[[k, c]];
                }
                x[[i, c]] = s / l.0[[i, i]];
            }
        }
        Ok(Matrix(x))
    }

    /// Eigen-decomposition of a symmetric matrix: eigenvalues ascending and
    /// the matching orthonormal eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> Result<(Array1<f64>, Matrix)> {
        if !self.is_square() {
            return Err(Error::Shape("eigen-decomposition of non-square matrix".into()));
        }
        let n = self.rows();
        let m = nalgebra::DMatrix::from_fn(n, n, |r, c| 0.5 * (self.0[[r, c]] + self.0[[c, r]]));
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = Array2::zeros((n, n));
        for (col, &k) in order.iter().enumerate() {
            for r in 0..n {
                vectors[[r, col]] = eig.eigenvectors[(r, k)];
            }
        }
        Ok((values, Matrix(vectors)))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.symmetric_eigen()?.0.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

fn check_indices(n: usize, idx: &[usize], what: &str) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::IndexSet(format!("{what} index {bad} out of bounds for size {n}")));
    }
    Ok(())
}

/// Conditional covariance `Σ_tt − Σ_tg Σ_gg⁻¹ Σ_gt` of the `target`
/// coordinates given the `given` coordinates.
pub fn schur_conditional(cov: &Matrix, target: &[usize], given: &[usize]) -> Result<Matrix> {
    let n = cov.rows();
    check_indices(n, target, "target")?;
    check_indices(n, given, "given")?;
    if let Some(&dup) = target.iter().find(|i| given.contains(i)) {
        return Err(Error::IndexSet(format!(
            "index {dup} appears in both target and given sets"
        )));
    }
    let s_tt = cov.select(target, target);
    if given.is_empty() {
        return Ok(s_tt);
    }
    let s_tg = cov.select(target, given);
    let s_gg = cov.select(given, given);
    let s_gt = s_tg.transpose();
    let correction = s_tg.matmul(&s_gg.solve_spd(&s_gt)?)?;
    Ok(Matrix(s_tt.0 - correction.0))
}

/// Regression coefficients `Σ_tg Σ_gg⁻¹` (conditional mean of target given
/// the given coordinates, for a zero-mean Gaussian).
pub fn regression_coefficients(cov: &Matrix, target: &[usize], given: &[usize]) -> Result<Matrix> {
    let n = cov.rows();
    check_indices(n, target, "target")?;
    check_indices(n, given, "given")?;
    if given.is_empty() {
        return Ok(Matrix::zeros(target.len(), 0));
    }
    let s_gg = cov.select(given, given);
    let s_gt = cov.select(given, target);
    // (Σ_gg⁻¹ Σ_gt)ᵀ = Σ_tg Σ_gg⁻¹
    Ok(s_gg.solve_spd(&s_gt)?.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cholesky_identity() {
        let l = Matrix::identity(3).cholesky().unwrap();
        assert_eq!(l, Matrix::identity(3));
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = m.cholesky().unwrap();
        assert_abs_diff_eq!(l.get(0, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.get(1, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(l.get(1, 1), 0.75f64.sqrt(), epsilon = 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
        let back = l.matmul(&l.transpose()).unwrap();
        assert!(back.max_abs_diff(&m) <= 1e-8);
    }

    #[test]
    fn cholesky_rank_deficient_names_pivot() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        match m.cholesky() {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected not-PD error, got {other:?}"),
        }
        let msg = m.cholesky().unwrap_err().to_string();
        assert!(msg.contains("not positive definite") && msg.contains("pivot 1"));
    }

    #[test]
    fn jitter_rescues_near_singular() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0 - 1e-13], vec![1.0 - 1e-13, 1.0]]).unwrap();
        assert!(m.cholesky().is_err());
        assert!(m.cholesky_jittered().is_ok());
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(Matrix::identity(4).logdet().unwrap(), 0.0);
        assert_abs_diff_eq!(
            Matrix::from_diag(&[4.0]).logdet().unwrap(),
            4f64.ln(),
            epsilon = 1e-15
        );
        let rho = 0.5;
        let m = Matrix::from_rows(&[
            vec![1.0, rho, rho],
            vec![rho, 1.0, rho],
            vec![rho, rho, 1.0],
        ])
        .unwrap();
        // cofactor expansion along the first row
        let det = 1.0 * (1.0 - rho * rho) - rho * (rho - rho * rho) + rho * (rho * rho - rho);
        assert_abs_diff_eq!(det, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.logdet().unwrap(), det.ln(), epsilon = 1e-12);
    }

    #[test]
    fn schur_examples() {
        let rho = 0.5;
        let m = Matrix::from_rows(&[
            vec![1.0, rho, rho],
            vec![rho, 1.0, rho],
            vec![rho, rho, 1.0],
        ])
        .unwrap();
        // direct 2x2 inverse of [[1, ρ], [ρ, 1]]
        let det = 1.0 - rho * rho;
        let inv = [[1.0 / det, -rho / det], [-rho / det, 1.0 / det]];
        let b = [rho, rho];
        let quad: f64 = (0..2)
            .map(|i| (0..2).map(|j| b[i] * inv[i][j] * b[j]).sum::<f64>())
            .sum();
        let expected = 1.0 - quad;
        assert_abs_diff_eq!(expected, 2.0 / 3.0, epsilon = 1e-15);
        let s = schur_conditional(&m, &[0], &[1, 2]).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), expected, epsilon = 1e-12);

        let s = schur_conditional(&m, &[1, 2], &[]).unwrap();
        assert_eq!(s, m.select(&[1, 2], &[1, 2]));

        let block = Matrix::from_diag(&[2.0, 3.0, 5.0]);
        let s = schur_conditional(&block, &[0, 2], &[1]).unwrap();
        assert_eq!(s, block.select(&[0, 2], &[0, 2]));

        assert!(matches!(
            schur_conditional(&m, &[0, 1], &[1]),
            Err(Error::IndexSet(_))
        ));
        assert!(matches!(
            schur_conditional(&m, &[0], &[3]),
            Err(Error::IndexSet(_))
        ));
    }

    #[test]
    fn eigen_equicorrelated() {
        let rho = 0.5;
        let m = Matrix::from_rows(&[
            vec![1.0, rho, rho],
            vec![rho, 1.0, rho],
            vec![rho, rho, 1.0],
        ])
        .unwrap();
        let (vals, _) = m.symmetric_eigen().unwrap();
        assert_abs_diff_eq!(vals[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn cholesky_round_trip(n in 1usize..8, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
            let mut m = a.dot(&a.t());
            for i in 0..n {
                m[[i, i]] += 0.1;
            }
            let m = Matrix::from_array(m);
            let l = m.cholesky().unwrap();
            prop_assert!(l.matmul(&l.transpose()).unwrap().max_abs_diff(&m) <= 1e-8);
        }
    }
}
