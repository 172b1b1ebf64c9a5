//! Closed-form ground truth for Gaussian systems: entropies, TC/DTC/S/Ω,
//! O-information gradients, and exact time-`t` scores of the noised laws.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::estimators::{ScoreField, ScoreSource};
use crate::math::{regression_coefficients, schur_conditional, Matrix, RngStream};
use crate::score_net::{ScoreTask, VarRole};
use crate::systems::{CovarianceMatrix, VariablePartition};

/// Total correlation, dual total correlation, S-information and
/// O-information, all in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub tc: f64,
    pub dtc: f64,
    pub s_info: f64,
    pub o_info: f64,
}

impl MeasureSet {
    pub const ZERO: MeasureSet = MeasureSet {
        tc: 0.0,
        dtc: 0.0,
        s_info: 0.0,
        o_info: 0.0,
    };
}

impl std::ops::Add for MeasureSet {
    type Output = MeasureSet;
    fn add(self, o: MeasureSet) -> MeasureSet {
        MeasureSet {
            tc: self.tc + o.tc,
            dtc: self.dtc + o.dtc,
            s_info: self.s_info + o.s_info,
            o_info: self.o_info + o.o_info,
        }
    }
}

/// `H = (D/2)(1 + ln 2π) + ½ ln det Σ`.
pub fn gaussian_entropy(cov: &Matrix) -> Result<f64> {
    let d = cov.rows() as f64;
    Ok(0.5 * d * (1.0 + (2.0 * std::f64::consts::PI).ln()) + 0.5 * cov.logdet()?)
}

fn block_entropy(cov: &CovarianceMatrix, vars: &[usize]) -> Result<f64> {
    let c = cov.partition.coords(vars);
    gaussian_entropy(&cov.matrix.select(&c, &c))
}

/// `H(X^target | X^given)` for a Gaussian system.
pub fn conditional_entropy(cov: &CovarianceMatrix, target: &[usize], given: &[usize]) -> Result<f64> {
    let p = &cov.partition;
    gaussian_entropy(&schur_conditional(&cov.matrix, &p.coords(target), &p.coords(given))?)
}

/// `I(X^a; X^b)`.
pub fn gaussian_mi(cov: &CovarianceMatrix, a: &[usize], b: &[usize]) -> Result<f64> {
    if b.is_empty() || a.is_empty() {
        return Ok(0.0);
    }
    Ok(block_entropy(cov, a)? - conditional_entropy(cov, a, b)?)
}

/// `I(X^a; X^b | X^c)`.
pub fn gaussian_cmi(cov: &CovarianceMatrix, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    let ac: Vec<usize> = a.iter().chain(c).copied().collect();
    let bc: Vec<usize> = b.iter().chain(c).copied().collect();
    let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    let ld = |vars: &[usize]| -> Result<f64> {
        if vars.is_empty() {
            return Ok(0.0);
        }
        let k = cov.partition.coords(vars);
        cov.matrix.select(&k, &k).logdet()
    };
    Ok(0.5 * (ld(&ac)? + ld(&bc)? - ld(&abc)? - ld(c)?))
}

/// Closed-form TC, DTC, S and Ω of a Gaussian system.
pub fn measures(cov: &CovarianceMatrix) -> Result<MeasureSet> {
    let p = &cov.partition;
    let n = p.n_vars();
    let joint = gaussian_entropy(&cov.matrix)?;
    let mut sum_marginal = 0.0;
    let mut sum_conditional = 0.0;
    for i in 0..n {
        sum_marginal += block_entropy(cov, &[i])?;
        sum_conditional += conditional_entropy(cov, &[i], &p.others(&[i]))?;
    }
    let tc = sum_marginal - joint;
    let dtc = joint - sum_conditional;
    Ok(MeasureSet {
        tc,
        dtc,
        s_info: tc + dtc,
        o_info: tc - dtc,
    })
}

/// `∂ᵢΩ = Ω(X) − Ω(X^{\i})`.
pub fn gradient(cov: &CovarianceMatrix, i: usize) -> Result<f64> {
    check_gradient_args(cov, i)?;
    let full = measures(cov)?.o_info;
    Ok(full - measures(&cov.subsystem(&cov.partition.others(&[i]))?)?.o_info)
}

/// Gradients for every variable; the full-system Ω is computed once.
pub fn gradients(cov: &CovarianceMatrix) -> Result<Vec<f64>> {
    let n = cov.n_vars();
    check_gradient_args(cov, 0)?;
    let full = measures(cov)?.o_info;
    (0..n)
        .map(|i| Ok(full - measures(&cov.subsystem(&cov.partition.others(&[i]))?)?.o_info))
        .collect()
}

fn check_gradient_args(cov: &CovarianceMatrix, i: usize) -> Result<()> {
    let n = cov.n_vars();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "O-information gradient needs at least 3 variables, got {n}"
        )));
    }
    cov.partition.check_var(i)
}

/// Gaussian moments of the clean law a task's score refers to: the perturbed
/// coordinates have conditional mean `reg · x_clean` and covariance `cov`
/// (stored as its eigen-decomposition).
#[derive(Debug, Clone)]
struct TaskGaussian {
    target_coords: Vec<usize>,
    clean_coords: Vec<usize>,
    reg: Array2<f64>,
    eigvals: Array1<f64>,
    eigvecs: Array2<f64>,
}

impl TaskGaussian {
    fn new(cov: &CovarianceMatrix, task: &ScoreTask) -> Result<Self> {
        let n = cov.n_vars();
        task.validate(n)?;
        let p = &cov.partition;
        let target_coords = p.coords(&task.vars_with_role(n, VarRole::Perturbed));
        let clean_coords = p.coords(&task.vars_with_role(n, VarRole::Clean));
        let cond = schur_conditional(&cov.matrix, &target_coords, &clean_coords)?;
        let reg = regression_coefficients(&cov.matrix, &target_coords, &clean_coords)?;
        let (eigvals, eigvecs) = cond.symmetric_eigen()?;
        Ok(TaskGaussian {
            target_coords,
            clean_coords,
            reg: reg.into_array(),
            eigvals,
            eigvecs: eigvecs.into_array(),
        })
    }

    /// `−(α²Σ_c + σ²I)⁻¹ (x_t − α μ_c)` row by row.
    fn scores(
        &self,
        schedule: &DiffusionSchedule,
        clean: ArrayView2<'_, f64>,
        perturbed: ArrayView2<'_, f64>,
        t: &[f64],
    ) -> Result<Array2<f64>> {
        let k = self.target_coords.len();
        let mut out = Array2::zeros((perturbed.nrows(), k));
        let mut resid = Array1::zeros(k);
        for r in 0..perturbed.nrows() {
            let c = schedule.coeffs(t[r])?;
            for a in 0..k {
                let mut mu = 0.0;
                for (b, &g) in self.clean_coords.iter().enumerate() {
                    mu += self.reg[[a, b]] * clean[[r, g]];
                }
                resid[a] = perturbed[[r, a]] - c.alpha * mu;
            }
            let mut proj = self.eigvecs.t().dot(&resid);
            for (j, v) in proj.iter_mut().enumerate() {
                *v /= c.alpha * c.alpha * self.eigvals[j] + c.sigma * c.sigma;
            }
            let s = self.eigvecs.dot(&proj);
            out.row_mut(r).assign(&s.mapv(|v| -v));
        }
        Ok(out)
    }
}

/// Exact scores of a zero-mean Gaussian system under the noising kernel.
///
/// Serves every task, including sub-system and subset-conditional ones.
#[derive(Debug, Clone)]
pub struct ExactScores {
    cov: CovarianceMatrix,
    schedule: DiffusionSchedule,
}

impl ExactScores {
    pub fn new(cov: CovarianceMatrix, schedule: DiffusionSchedule) -> Result<Self> {
        schedule.validate()?;
        cov.matrix.cholesky()?;
        Ok(ExactScores { cov, schedule })
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.cov
    }

    /// Score for one task at one time; `clean` is the full clean row and
    /// `perturbed` the task's perturbed coordinates.
    pub fn exact_score(
        &self,
        task: &ScoreTask,
        clean: &[f64],
        perturbed: &[f64],
        t: f64,
    ) -> Result<Vec<f64>> {
        let c = ArrayView2::from_shape((1, clean.len()), clean)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let p = ArrayView2::from_shape((1, perturbed.len()), perturbed)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let g = TaskGaussian::new(&self.cov, task)?;
        Ok(g.scores(&self.schedule, c, p, &[t])?.into_raw_vec_and_offset().0)
    }
}

impl ScoreSource for ExactScores {
    fn partition(&self) -> &VariablePartition {
        &self.cov.partition
    }

    fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    fn supports(&self, task: &ScoreTask) -> bool {
        task.validate(self.cov.n_vars()).is_ok()
    }

    fn kind(&self) -> &'static str {
        "exact"
    }

    fn scores(
        &self,
        task: &ScoreTask,
        clean: ArrayView2<'_, f64>,
        perturbed: ArrayView2<'_, f64>,
        t: &[f64],
        _rng: &mut RngStream,
    ) -> Result<Array2<f64>> {
        let g = TaskGaussian::new(&self.cov, task)?;
        if perturbed.ncols() != g.target_coords.len()
            || clean.ncols() != self.cov.partition.total_dim()
            || clean.nrows() != perturbed.nrows()
            || t.len() != perturbed.nrows()
        {
            return Err(Error::Shape(format!(
                "exact scores for {task}: clean {:?}, perturbed {:?}, {} times",
                clean.dim(),
                perturbed.dim(),
                t.len()
            )));
        }
        g.scores(&self.schedule, clean, perturbed, t)
    }
}

/// Time-`t` score of a noised Gaussian `N(α_t μ, α_t² Σ + σ_t² I)`.
#[derive(Debug, Clone)]
pub struct NoisedGaussian {
    mean: Array1<f64>,
    eigvals: Array1<f64>,
    eigvecs: Array2<f64>,
    schedule: DiffusionSchedule,
}

impl NoisedGaussian {
    pub fn new(mean: Vec<f64>, cov: &Matrix, schedule: DiffusionSchedule) -> Result<Self> {
        if mean.len() != cov.rows() {
            return Err(Error::Shape("mean and covariance disagree".into()));
        }
        cov.cholesky()?;
        let (eigvals, eigvecs) = cov.symmetric_eigen()?;
        Ok(NoisedGaussian {
            mean: Array1::from(mean),
            eigvals,
            eigvecs: eigvecs.into_array(),
            schedule,
        })
    }
}

impl ScoreField for NoisedGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score(&self, x_t: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x_t.raw_dim());
        for r in 0..x_t.nrows() {
            let c = self.schedule.coeffs(t[r])?;
            let resid = &x_t.row(r) - &(&self.mean * c.alpha);
            let mut proj = self.eigvecs.t().dot(&resid);
            for (j, v) in proj.iter_mut().enumerate() {
                *v /= c.alpha * c.alpha * self.eigvals[j] + c.sigma * c.sigma;
            }
            out.row_mut(r).assign(&self.eigvecs.dot(&proj).mapv(|v| -v));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_redundant_cov, build_synergistic_cov, VariablePartition};
    use approx::assert_abs_diff_eq;

    const H1: f64 = 1.4189385332046727;

    fn equicorrelated(n: usize, rho: f64) -> CovarianceMatrix {
        let mut m = Matrix::identity(n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m.set(a, b, rho);
                }
            }
        }
        CovarianceMatrix::new(m, VariablePartition::uniform(n, 1).unwrap()).unwrap()
    }

    #[test]
    fn entropy_closed_forms() {
        assert_abs_diff_eq!(gaussian_entropy(&Matrix::identity(1)).unwrap(), H1, epsilon = 1e-12);
        assert_abs_diff_eq!(
            gaussian_entropy(&Matrix::identity(5)).unwrap(),
            5.0 * H1,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            gaussian_entropy(&Matrix::from_diag(&[4.0])).unwrap(),
            H1 + 0.5 * 4f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_measures_vanish() {
        let c = CovarianceMatrix::identity(VariablePartition::uniform(4, 2).unwrap());
        let m = measures(&c).unwrap();
        for v in [m.tc, m.dtc, m.s_info, m.o_info] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn equicorrelated_three() {
        let m = measures(&equicorrelated(3, 0.5)).unwrap();
        // hand calculation: det Σ = 0.5, conditional variance 2/3
        let tc = -0.5 * 0.5f64.ln();
        let dtc = 0.5 * 0.5f64.ln() - 1.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(m.tc, tc, epsilon = 1e-12);
        assert_abs_diff_eq!(m.dtc, dtc, epsilon = 1e-12);
        assert_abs_diff_eq!(m.tc, 0.3466, epsilon = 1e-4);
        assert_abs_diff_eq!(m.dtc, 0.2616, epsilon = 1e-4);
        assert_abs_diff_eq!(m.o_info, 0.0850, epsilon = 1e-4);
        assert_abs_diff_eq!(m.s_info, 0.6082, epsilon = 1e-4);
    }

    #[test]
    fn two_variables_have_zero_oinfo() {
        for rho in [0.1, 0.5, 0.9] {
            let c = equicorrelated(2, rho);
            let m = measures(&c).unwrap();
            let mi = -0.5 * (1.0 - rho * rho).ln();
            assert_abs_diff_eq!(m.tc, mi, epsilon = 1e-12);
            assert_abs_diff_eq!(m.dtc, mi, epsilon = 1e-12);
            assert_abs_diff_eq!(m.o_info, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_cases() {
        let c = equicorrelated(3, 0.5);
        let omega = measures(&c).unwrap().o_info;
        for i in 0..3 {
            assert_abs_diff_eq!(gradient(&c, i).unwrap(), omega, epsilon = 1e-12);
        }
        let g = gradients(&equicorrelated(4, 0.3)).unwrap();
        for v in &g[1..] {
            assert_abs_diff_eq!(*v, g[0], epsilon = 1e-12);
        }
        // a singleton independent block contributes nothing
        let red = build_redundant_cov(3, 1, 1.0).unwrap();
        let single = CovarianceMatrix::identity(VariablePartition::uniform(1, 1).unwrap());
        let mixed = crate::systems::build_mixed_cov(&[red, single]).unwrap();
        assert_abs_diff_eq!(gradient(&mixed, 3).unwrap(), 0.0, epsilon = 1e-12);
        assert!(gradient(&equicorrelated(2, 0.5), 0).is_err());
    }

    #[test]
    fn coinformation_matches_n3() {
        for c in [
            equicorrelated(3, 0.5),
            build_synergistic_cov(3, 1, 0.5).unwrap(),
            build_redundant_cov(3, 2, 0.7).unwrap(),
        ] {
            let co = gaussian_mi(&c, &[0], &[1]).unwrap() - gaussian_cmi(&c, &[0], &[1], &[2]).unwrap();
            assert_abs_diff_eq!(measures(&c).unwrap().o_info, co, epsilon = 1e-10);
        }
    }

    #[test]
    fn exact_score_limits() {
        let s = DiffusionSchedule::default();
        let c = CovarianceMatrix::identity(VariablePartition::uniform(3, 1).unwrap());
        let ex = ExactScores::new(c, s).unwrap();
        let xt = [0.3, -1.0, 2.0];
        let sc = ex.exact_score(&ScoreTask::Joint, &[0.0; 3], &xt, 0.37).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(sc[k], -xt[k], epsilon = 1e-12);
        }
        let red = ExactScores::new(build_redundant_cov(3, 1, 0.5).unwrap(), s).unwrap();
        let sc = red.exact_score(&ScoreTask::Joint, &[0.0; 3], &xt, 1.0).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(sc[k], -xt[k], epsilon = 1e-3);
        }
    }

    fn log_density(mean: &[f64], cov: &Matrix, x: &[f64]) -> f64 {
        let d = x.len();
        let diff = Matrix::from_row_major(d, 1, x.iter().zip(mean).map(|(a, b)| a - b).collect())
            .unwrap();
        let sol = cov.solve_spd(&diff).unwrap();
        let quad: f64 = (0..d).map(|k| diff.get(k, 0) * sol.get(k, 0)).sum();
        -0.5 * (quad + cov.logdet().unwrap() + d as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    #[test]
    fn conditional_score_matches_finite_difference() {
        let s = DiffusionSchedule::default();
        let cov = build_redundant_cov(3, 2, 0.8).unwrap();
        let ex = ExactScores::new(cov.clone(), s).unwrap();
        let clean = [0.4, -0.2, 1.1, 0.3, -0.7, 0.9];
        let task = ScoreTask::conditional(1, [0, 2]).unwrap();
        let t = 0.2;
        let k = s.coeffs(t).unwrap();
        // analytically noised conditional law of block 1 given blocks 0, 2
        let target = [2usize, 3];
        let given = [0usize, 1, 4, 5];
        let cond = schur_conditional(&cov.matrix, &target, &given).unwrap();
        let reg = regression_coefficients(&cov.matrix, &target, &given).unwrap();
        let mean: Vec<f64> = (0..2)
            .map(|a| k.alpha * (0..4).map(|b| reg.get(a, b) * clean[given[b]]).sum::<f64>())
            .collect();
        let mut noised = cond.clone();
        for a in 0..2 {
            for b in 0..2 {
                noised.set(a, b, k.alpha * k.alpha * cond.get(a, b));
            }
            noised.set(a, a, noised.get(a, a) + k.sigma * k.sigma);
        }
        let xt = [0.5, -0.8];
        let score = ex.exact_score(&task, &clean, &xt, t).unwrap();
        let h = 1e-5;
        for a in 0..2 {
            let mut up = xt;
            let mut dn = xt;
            up[a] += h;
            dn[a] -= h;
            let fd = (log_density(&mean, &noised, &up) - log_density(&mean, &noised, &dn)) / (2.0 * h);
            assert!((fd - score[a]).abs() <= 1e-5, "coord {a}: fd {fd} vs {}", score[a]);
        }
    }

    #[test]
    fn exact_score_continuous_in_time() {
        let s = DiffusionSchedule::default();
        let ex = ExactScores::new(build_synergistic_cov(4, 1, 0.5).unwrap(), s).unwrap();
        let clean = [0.2, 0.1, -0.3, 0.8];
        let task = ScoreTask::conditional_on_rest(1, 4);
        let dt = 1e-6;
        for &t in &[1e-3, 0.1, 0.5, 0.9] {
            let a = ex.exact_score(&task, &clean, &[0.7], t).unwrap()[0];
            let b = ex.exact_score(&task, &clean, &[0.7], t + dt).unwrap()[0];
            assert!((a - b).abs() < 1e-2, "jump {} at t={t}", (a - b).abs());
        }
    }
}
