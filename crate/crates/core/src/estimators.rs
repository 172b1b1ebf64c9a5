//! Monte-Carlo estimators of TC, DTC, S-information, O-information,
//! conditional mutual information and O-information gradients from time-varying
//! scores.
//!
//! Every estimator integrates `(g_t²/2)·E‖s_a − s_b‖²` over the diffusion
//! time, where `s_a`, `s_b` are two score functions evaluated on one shared
//! perturbation of the data. The time integral is sampled with
//! [`TimeSampler`]; `mc_steps` time draws are taken per data row, and the
//! whole procedure is repeated once per seed.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionSchedule, KernelCoeffs, TimeSampler, TimeSampling};
use crate::error::{Error, Result};
use crate::math::{mean_and_std_error, RngStream};
use crate::score_net::ScoreTask;
use crate::systems::{Dataset, VariablePartition};

/// Uniform access to time-varying scores, whether learned or analytic.
pub trait ScoreSource: Sync {
    fn partition(&self) -> &VariablePartition;

    fn schedule(&self) -> &DiffusionSchedule;

    fn supports(&self, task: &ScoreTask) -> bool;

    /// Short label recorded in reports (`"exact"`, `"trained"`).
    fn kind(&self) -> &'static str;

    /// Scores of the task's perturbed coordinates, one row per sample.
    ///
    /// `clean` holds full clean rows (used where the task conditions on
    /// clean values), `perturbed` the perturbed coordinates of the task's
    /// target variables in variable order, `t` the per-row times. `rng`
    /// supplies noise fills for dropped variables.
    fn scores(
        &self,
        task: &ScoreTask,
        clean: ArrayView2<'_, f64>,
        perturbed: ArrayView2<'_, f64>,
        t: &[f64],
        rng: &mut RngStream,
    ) -> Result<Array2<f64>>;
}

/// A single time-varying score field `∇ log p_t` over a fixed dimension.
pub trait ScoreField: Sync {
    fn dim(&self) -> usize;
    fn score(&self, x_t: ArrayView2<'_, f64>, t: &[f64]) -> Result<Array2<f64>>;
}

/// Which identity the O-information gradient estimate is assembled from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientFormulation {
    /// `(2−N)·I(Xⁱ; X^{\i}) + Σⱼ I(Xⁱ; X^{\{i,j\}})`.
    #[default]
    MutualInformation,
    /// `Ω(X) − Ω(X^{\i})`, each estimated from its own TC/DTC terms.
    Subsystem,
}

/// Monte-Carlo settings shared by all estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Time draws per data row.
    pub mc_steps: usize,
    /// One independent repetition per seed; the reported error is the
    /// between-seed standard error.
    pub seeds: Vec<u64>,
    pub time_sampling: TimeSampling,
    /// Draw the `mc_steps` times of each row from the equal-mass strata
    /// `[k/K, (k+1)/K)` of the proposal instead of independently.
    #[serde(default)]
    pub stratified: bool,
    /// Rows scored together.
    pub chunk_size: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            mc_steps: 10,
            seeds: (0..5).collect(),
            time_sampling: TimeSampling::Importance,
            stratified: false,
            chunk_size: 2048,
        }
    }
}

impl McOptions {
    pub fn validate(&self) -> Result<()> {
        if self.mc_steps == 0 || self.seeds.is_empty() || self.chunk_size == 0 {
            return Err(Error::Config(
                "mc_steps, seeds and chunk_size must all be non-empty/positive".into(),
            ));
        }
        Ok(())
    }
}

/// An estimated quantity in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    /// Between-seed standard error; within-run standard error when a single
    /// seed is used.
    pub std_error: f64,
    pub n_samples: usize,
    pub mc_steps: usize,
    pub time_sampling: TimeSampling,
    pub per_seed: Vec<f64>,
}

impl MeasureEstimate {
    fn zero(n_samples: usize, opts: &McOptions) -> Self {
        MeasureEstimate {
            value: 0.0,
            std_error: 0.0,
            n_samples,
            mc_steps: opts.mc_steps,
            time_sampling: opts.time_sampling,
            per_seed: vec![0.0; opts.seeds.len()],
        }
    }

    /// Standard error of `self − other` assuming independence.
    pub fn combined_error(&self, other: &MeasureEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// Joint estimate of all four measures from shared draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OInfoEstimate {
    pub tc: MeasureEstimate,
    pub dtc: MeasureEstimate,
    pub s_info: MeasureEstimate,
    /// Exactly `tc.value − dtc.value`.
    pub o_info: MeasureEstimate,
}

/// Streaming sum and sum of squares of per-draw contributions.
#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    sum: f64,
    sum_sq: f64,
}

impl Accum {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }
}

/// One chunk of rows at one Monte-Carlo step: times, weights, and the joint
/// perturbation `x_t = α x + σ ε` shared by every score term.
struct Draw<'a> {
    clean: ArrayView2<'a, f64>,
    x_t: Array2<f64>,
    t: Vec<f64>,
    weight: Vec<f64>,
    coeffs: Vec<KernelCoeffs>,
}

impl Draw<'_> {
    fn rows(&self) -> usize {
        self.t.len()
    }

    /// `weight · g²/2`, the per-row factor in front of every squared norm.
    fn factor(&self, r: usize) -> f64 {
        self.weight[r] * 0.5 * self.coeffs[r].g2
    }

    fn block(&self, coords: &[usize]) -> Array2<f64> {
        self.x_t.select(Axis(1), coords)
    }
}

fn row_sq_dist(a: &Array2<f64>, b: &Array2<f64>, r: usize) -> f64 {
    a.row(r)
        .iter()
        .zip(b.row(r).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Runs `n_terms` accumulators over every seed, chunk and MC step, returning
/// per-seed `(mean, within-run std error)` for each term.
fn integrate<F>(
    data: &Dataset,
    schedule: &DiffusionSchedule,
    opts: &McOptions,
    n_terms: usize,
    mut kernel: F,
) -> Result<Vec<Vec<(f64, f64)>>>
where
    F: FnMut(&Draw<'_>, &mut RngStream, &mut Vec<Vec<f64>>) -> Result<()>,
{
    opts.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot estimate from an empty dataset".into()));
    }
    let sampler = TimeSampler::new(*schedule, opts.time_sampling)?;
    let m = data.n_samples();
    let d = data.total_dim();
    let n_draws = (m * opts.mc_steps) as f64;
    let mut results = Vec::with_capacity(opts.seeds.len());
    for &seed in &opts.seeds {
        let base = RngStream::new(seed, 0x0e57);
        let mut acc = vec![Accum::default(); n_terms];
        let mut contrib: Vec<Vec<f64>> = vec![Vec::new(); n_terms];
        let mut lo = 0;
        while lo < m {
            let hi = (lo + opts.chunk_size).min(m);
            let clean = data.samples.slice(ndarray::s![lo..hi, ..]);
            for step in 0..opts.mc_steps {
                // keyed by (chunk, step): the draws of k steps are a prefix of those of k + 1
                let mut rng = base.substream(((lo / opts.chunk_size) as u64) << 32 | step as u64);
                let rows = hi - lo;
                let (t, weight) = if opts.stratified {
                    let k = opts.mc_steps as f64;
                    (0..rows)
                        .map(|_| sampler.at_quantile((step as f64 + rng.uniform()) / k))
                        .unzip()
                } else {
                    sampler.sample_many(rows, &mut rng)
                };
                let eps = rng.normal_matrix(rows, d);
                let coeffs: Vec<KernelCoeffs> =
                    t.iter().map(|&tr| schedule.coeffs(tr)).collect::<Result<_>>()?;
                let mut x_t = Array2::zeros((rows, d));
                for r in 0..rows {
                    let k = coeffs[r];
                    for c in 0..d {
                        x_t[[r, c]] = k.alpha * clean[[r, c]] + k.sigma * eps[[r, c]];
                    }
                }
                let draw = Draw {
                    clean,
                    x_t,
                    t,
                    weight,
                    coeffs,
                };
                for c in contrib.iter_mut() {
                    c.clear();
                }
                kernel(&draw, &mut rng, &mut contrib)?;
                for (a, c) in acc.iter_mut().zip(&contrib) {
                    if c.len() != rows {
                        return Err(Error::Shape("estimator kernel produced wrong row count".into()));
                    }
                    for &v in c {
                        if !v.is_finite() {
                            return Err(Error::NonFinite("score difference".into()));
                        }
                        a.push(v);
                    }
                }
            }
            lo = hi;
        }
        results.push(
            acc.iter()
                .map(|a| {
                    let mean = a.sum / n_draws;
                    let var = (a.sum_sq / n_draws - mean * mean).max(0.0);
                    let se = if n_draws > 1.0 { (var / (n_draws - 1.0)).sqrt() } else { 0.0 };
                    (mean, se)
                })
                .collect(),
        );
    }
    Ok(results)
}

fn summarize(per_seed: &[Vec<(f64, f64)>], term: usize, n_samples: usize, opts: &McOptions) -> MeasureEstimate {
    let values: Vec<f64> = per_seed.iter().map(|s| s[term].0).collect();
    let (value, between) = mean_and_std_error(&values);
    let std_error = if values.len() > 1 { between } else { per_seed[0][term].1 };
    MeasureEstimate {
        value,
        std_error,
        n_samples,
        mc_steps: opts.mc_steps,
        time_sampling: opts.time_sampling,
        per_seed: values,
    }
}

fn require(source: &dyn ScoreSource, task: &ScoreTask) -> Result<()> {
    if source.supports(task) {
        Ok(())
    } else {
        Err(Error::MissingTask(task.to_string()))
    }
}

fn check_data(source: &dyn ScoreSource, data: &Dataset) -> Result<()> {
    if source.partition() != &data.partition {
        return Err(Error::Shape(format!(
            "dataset partition {:?} does not match score source partition {:?}",
            data.partition.dims(),
            source.partition().dims()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Needs {
    marginal: bool,
    conditional: bool,
}

/// Terms: 0 = TC, 1 = DTC, 2 = S, 3 = TC − DTC (per draw).
fn oinfo_terms(source: &dyn ScoreSource, data: &Dataset, opts: &McOptions, needs: Needs) -> Result<Vec<Vec<(f64, f64)>>> {
    check_data(source, data)?;
    let p = source.partition().clone();
    let n = p.n_vars();
    let marginals: Vec<ScoreTask> = (0..n).map(|i| ScoreTask::Marginal { target: i }).collect();
    let conditionals: Vec<ScoreTask> = (0..n).map(|i| ScoreTask::conditional_on_rest(i, n)).collect();
    require(source, &ScoreTask::Joint)?;
    if needs.marginal {
        marginals.iter().try_for_each(|t| require(source, t))?;
    }
    if needs.conditional {
        conditionals.iter().try_for_each(|t| require(source, t))?;
    }
    integrate(data, source.schedule(), opts, 4, |draw, rng, out| {
        let rows = draw.rows();
        let joint = source.scores(&ScoreTask::Joint, draw.clean, draw.x_t.view(), &draw.t, rng)?;
        let mut tc = vec![0.0; rows];
        let mut dtc = vec![0.0; rows];
        let mut s = vec![0.0; rows];
        for i in 0..n {
            let coords = p.coords(&[i]);
            let block = draw.block(&coords);
            let joint_i = joint.select(Axis(1), &coords);
            let marg = if needs.marginal {
                Some(source.scores(&marginals[i], draw.clean, block.view(), &draw.t, rng)?)
            } else {
                None
            };
            let cond = if needs.conditional {
                Some(source.scores(&conditionals[i], draw.clean, block.view(), &draw.t, rng)?)
            } else {
                None
            };
            for r in 0..rows {
                if let Some(m) = &marg {
                    tc[r] += row_sq_dist(&joint_i, m, r);
                }
                if let Some(c) = &cond {
                    dtc[r] += row_sq_dist(&joint_i, c, r);
                }
                if let (Some(m), Some(c)) = (&marg, &cond) {
                    s[r] += row_sq_dist(m, c, r);
                }
            }
        }
        for r in 0..rows {
            let f = draw.factor(r);
            out[0].push(f * tc[r]);
            out[1].push(f * dtc[r]);
            out[2].push(f * s[r]);
            out[3].push(f * (tc[r] - dtc[r]));
        }
        Ok(())
    })
}

/// Total correlation from the joint and marginal scores.
pub fn estimate_tc(source: &dyn ScoreSource, data: &Dataset, opts: &McOptions) -> Result<MeasureEstimate> {
    let r = oinfo_terms(source, data, opts, Needs { marginal: true, conditional: false })?;
    Ok(summarize(&r, 0, data.n_samples(), opts))
}

/// Dual total correlation from the joint and conditional scores.
pub fn estimate_dtc(source: &dyn ScoreSource, data: &Dataset, opts: &McOptions) -> Result<MeasureEstimate> {
    let r = oinfo_terms(source, data, opts, Needs { marginal: false, conditional: true })?;
    Ok(summarize(&r, 1, data.n_samples(), opts))
}

/// S-information from the marginal and conditional scores.
pub fn estimate_s(source: &dyn ScoreSource, data: &Dataset, opts: &McOptions) -> Result<MeasureEstimate> {
    let r = oinfo_terms(source, data, opts, Needs { marginal: true, conditional: true })?;
    Ok(summarize(&r, 2, data.n_samples(), opts))
}

/// TC, DTC, S and Ω from one set of draws; `Ω = TC − DTC` exactly.
pub fn estimate_oinfo(source: &dyn ScoreSource, data: &Dataset, opts: &McOptions) -> Result<OInfoEstimate> {
    let r = oinfo_terms(source, data, opts, Needs { marginal: true, conditional: true })?;
    let m = data.n_samples();
    let tc = summarize(&r, 0, m, opts);
    let dtc = summarize(&r, 1, m, opts);
    let mut o_info = summarize(&r, 3, m, opts);
    o_info.value = tc.value - dtc.value;
    o_info.per_seed = tc.per_seed.iter().zip(&dtc.per_seed).map(|(t, d)| t - d).collect();
    Ok(OInfoEstimate {
        s_info: summarize(&r, 2, m, opts),
        tc,
        dtc,
        o_info,
    })
}

/// `I(Xⁱ; X^S)` from the conditional score given `S` and the marginal score
/// of `Xⁱ`, sharing the perturbation of block `i`.
pub fn estimate_mi(
    source: &dyn ScoreSource,
    target: usize,
    given: &[usize],
    data: &Dataset,
    opts: &McOptions,
) -> Result<MeasureEstimate> {
    check_data(source, data)?;
    source.partition().check_var(target)?;
    let cond = ScoreTask::conditional(target, given.iter().copied())?;
    let marg = ScoreTask::Marginal { target };
    if cond == marg {
        opts.validate()?;
        return Ok(MeasureEstimate::zero(data.n_samples(), opts));
    }
    require(source, &cond)?;
    require(source, &marg)?;
    let coords = source.partition().coords(&[target]);
    let r = integrate(data, source.schedule(), opts, 1, |draw, rng, out| {
        let block = draw.block(&coords);
        let sc = source.scores(&cond, draw.clean, block.view(), &draw.t, rng)?;
        let sm = source.scores(&marg, draw.clean, block.view(), &draw.t, rng)?;
        for r in 0..draw.rows() {
            out[0].push(draw.factor(r) * row_sq_dist(&sc, &sm, r));
        }
        Ok(())
    })?;
    Ok(summarize(&r, 0, data.n_samples(), opts))
}

/// Tasks a gradient estimate for variable `i` needs under `formulation`.
pub fn gradient_tasks(n_vars: usize, i: usize, formulation: GradientFormulation) -> Vec<ScoreTask> {
    let rest_without = |j: usize| (0..n_vars).filter(move |&v| v != i && v != j);
    match formulation {
        GradientFormulation::MutualInformation => {
            let mut tasks = vec![
                ScoreTask::Marginal { target: i },
                ScoreTask::conditional_on_rest(i, n_vars),
            ];
            for j in (0..n_vars).filter(|&j| j != i) {
                tasks.push(ScoreTask::conditional(i, rest_without(j)).expect("i excluded"));
            }
            tasks
        }
        GradientFormulation::Subsystem => {
            let mut tasks = vec![ScoreTask::Joint, ScoreTask::SubJoint { dropped: i }];
            for j in 0..n_vars {
                tasks.push(ScoreTask::Marginal { target: j });
                tasks.push(ScoreTask::conditional_on_rest(j, n_vars));
                if j != i {
                    tasks.push(ScoreTask::conditional(j, rest_without(j)).expect("j excluded"));
                }
            }
            tasks
        }
    }
}

/// Gradient of O-information with respect to variable `i`.
pub fn estimate_gradient(
    source: &dyn ScoreSource,
    i: usize,
    data: &Dataset,
    opts: &McOptions,
    formulation: GradientFormulation,
) -> Result<MeasureEstimate> {
    check_data(source, data)?;
    let p = source.partition().clone();
    let n = p.n_vars();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "O-information gradient needs at least 3 variables, got {n}"
        )));
    }
    p.check_var(i)?;
    for task in gradient_tasks(n, i, formulation) {
        require(source, &task)?;
    }
    let r = match formulation {
        GradientFormulation::MutualInformation => {
            let coords = p.coords(&[i]);
            let marg = ScoreTask::Marginal { target: i };
            let full = ScoreTask::conditional_on_rest(i, n);
            let partial: Vec<ScoreTask> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ScoreTask::conditional(i, (0..n).filter(|&v| v != i && v != j)).expect("i excluded"))
                .collect();
            let lead = 2.0 - n as f64;
            integrate(data, source.schedule(), opts, 1, |draw, rng, out| {
                let block = draw.block(&coords);
                let sm = source.scores(&marg, draw.clean, block.view(), &draw.t, rng)?;
                let sf = source.scores(&full, draw.clean, block.view(), &draw.t, rng)?;
                let mut acc: Vec<f64> = (0..draw.rows()).map(|r| lead * row_sq_dist(&sf, &sm, r)).collect();
                for task in &partial {
                    let sp = source.scores(task, draw.clean, block.view(), &draw.t, rng)?;
                    for (r, a) in acc.iter_mut().enumerate() {
                        *a += row_sq_dist(&sp, &sm, r);
                    }
                }
                for (r, a) in acc.iter().enumerate() {
                    out[0].push(draw.factor(r) * a);
                }
                Ok(())
            })?
        }
        GradientFormulation::Subsystem => {
            let rest = p.others(&[i]);
            let rest_coords = p.coords(&rest);
            integrate(data, source.schedule(), opts, 1, |draw, rng, out| {
                let rows = draw.rows();
                let joint = source.scores(&ScoreTask::Joint, draw.clean, draw.x_t.view(), &draw.t, rng)?;
                let sub_block = draw.block(&rest_coords);
                let sub_joint =
                    source.scores(&ScoreTask::SubJoint { dropped: i }, draw.clean, sub_block.view(), &draw.t, rng)?;
                // Ω(X) − Ω(X^{\i}) = [T − D](X) − [T − D](X^{\i}) per draw
                let mut acc = vec![0.0; rows];
                let mut sub_col = 0;
                for j in 0..n {
                    let coords = p.coords(&[j]);
                    let block = draw.block(&coords);
                    let sm = source.scores(&ScoreTask::Marginal { target: j }, draw.clean, block.view(), &draw.t, rng)?;
                    let sc = source.scores(&ScoreTask::conditional_on_rest(j, n), draw.clean, block.view(), &draw.t, rng)?;
                    let joint_j = joint.select(Axis(1), &coords);
                    for r in 0..rows {
                        acc[r] += row_sq_dist(&joint_j, &sm, r) - row_sq_dist(&joint_j, &sc, r);
                    }
                    if j == i {
                        continue;
                    }
                    let width = coords.len();
                    let sub_j = sub_joint.slice(ndarray::s![.., sub_col..sub_col + width]).to_owned();
                    sub_col += width;
                    let sp = source.scores(
                        &ScoreTask::conditional(j, (0..n).filter(|&v| v != i && v != j)).expect("j excluded"),
                        draw.clean,
                        block.view(),
                        &draw.t,
                        rng,
                    )?;
                    for r in 0..rows {
                        acc[r] -= row_sq_dist(&sub_j, &sm, r) - row_sq_dist(&sub_j, &sp, r);
                    }
                }
                for (r, a) in acc.iter().enumerate() {
                    out[0].push(draw.factor(r) * a);
                }
                Ok(())
            })?
        }
    };
    Ok(summarize(&r, 0, data.n_samples(), opts))
}

/// `KL(p ‖ q)` from the two time-varying score fields, with `samples` drawn
/// from `p`.
pub fn kl_divergence(
    p: &dyn ScoreField,
    q: &dyn ScoreField,
    samples: &Dataset,
    schedule: &DiffusionSchedule,
    opts: &McOptions,
) -> Result<MeasureEstimate> {
    if p.dim() != q.dim() || p.dim() != samples.total_dim() {
        return Err(Error::Shape("score fields and samples disagree on dimension".into()));
    }
    let r = integrate(samples, schedule, opts, 1, |draw, _rng, out| {
        let sp = p.score(draw.x_t.view(), &draw.t)?;
        let sq = q.score(draw.x_t.view(), &draw.t)?;
        for r in 0..draw.rows() {
            out[0].push(draw.factor(r) * row_sq_dist(&sp, &sq, r));
        }
        Ok(())
    })?;
    Ok(summarize(&r, 0, samples.n_samples(), opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Matrix;
    use crate::oracle::{measures, ExactScores, NoisedGaussian};
    use crate::systems::{build_redundant_cov, sample, CovarianceMatrix};

    fn opts(seeds: usize) -> McOptions {
        McOptions {
            seeds: (0..seeds as u64).collect(),
            ..McOptions::default()
        }
    }

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

    fn setup(cov: &CovarianceMatrix, m: usize) -> (ExactScores, Dataset) {
        let src = ExactScores::new(cov.clone(), DiffusionSchedule::default()).unwrap();
        let data = sample(cov, m, &mut RngStream::new(99, 0)).unwrap();
        (src, data)
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let cov = equicorrelated(3, 0.5);
        let (src, data) = setup(&cov, 0);
        assert!(estimate_tc(&src, &data, &opts(1)).is_err());
    }

    #[test]
    fn identity_gives_zero() {
        let cov = CovarianceMatrix::identity(VariablePartition::uniform(3, 1).unwrap());
        let (src, data) = setup(&cov, 2000);
        let est = estimate_oinfo(&src, &data, &opts(2)).unwrap();
        for e in [&est.tc, &est.dtc, &est.s_info, &est.o_info] {
            assert!(e.value.abs() < 1e-12, "{}", e.value);
        }
    }

    #[test]
    fn two_dim_mutual_information() {
        let rho: f64 = 0.5;
        let cov = equicorrelated(2, rho);
        let (src, data) = setup(&cov, 10_000);
        let truth = -0.5 * (1.0 - rho * rho).ln();
        let tc = estimate_tc(&src, &data, &opts(5)).unwrap();
        assert!((tc.value - truth).abs() <= 3.0 * tc.std_error.max(1e-3), "{tc:?}");
        let mi = estimate_mi(&src, 0, &[1], &data, &opts(5)).unwrap();
        assert!((mi.value - truth).abs() <= 3.0 * mi.std_error.max(1e-3), "{mi:?}");
        let dtc = estimate_dtc(&src, &data, &opts(5)).unwrap();
        assert!((dtc.value - tc.value).abs() <= 3.0 * dtc.combined_error(&tc) + 0.01);
    }

    #[test]
    fn equicorrelated_three_matches_oracle() {
        let cov = equicorrelated(3, 0.5);
        let truth = measures(&cov).unwrap();
        let (src, data) = setup(&cov, 10_000);
        let est = estimate_oinfo(&src, &data, &opts(5)).unwrap();
        for (e, t) in [
            (&est.tc, truth.tc),
            (&est.dtc, truth.dtc),
            (&est.s_info, truth.s_info),
        ] {
            assert!((e.value - t).abs() <= 3.0 * e.std_error.max(2e-3), "{} vs {t}", e.value);
        }
        assert_eq!(est.o_info.value, est.tc.value - est.dtc.value);
        let s_alone = estimate_s(&src, &data, &opts(5)).unwrap();
        let sum_err = (s_alone.std_error.powi(2) + est.tc.std_error.powi(2) + est.dtc.std_error.powi(2)).sqrt();
        assert!((s_alone.value - est.tc.value - est.dtc.value).abs() <= 3.0 * sum_err);
    }

    #[test]
    fn empty_conditioning_set_is_zero() {
        let cov = equicorrelated(3, 0.5);
        let (src, data) = setup(&cov, 100);
        let mi = estimate_mi(&src, 1, &[], &data, &opts(2)).unwrap();
        assert_eq!(mi.value, 0.0);
    }

    #[test]
    fn gaussian_kl_shift() {
        let s = DiffusionSchedule::default();
        let p = NoisedGaussian::new(vec![0.0], &Matrix::identity(1), s).unwrap();
        let q = NoisedGaussian::new(vec![1.0], &Matrix::identity(1), s).unwrap();
        let cov = CovarianceMatrix::identity(VariablePartition::uniform(1, 1).unwrap());
        let data = sample(&cov, 10_000, &mut RngStream::new(1, 0)).unwrap();
        let kl = kl_divergence(&p, &q, &data, &s, &opts(5)).unwrap();
        assert!((kl.value - 0.5).abs() <= 3.0 * kl.std_error.max(1e-3), "{kl:?}");
    }

    #[test]
    fn stratified_kl_is_unbiased() {
        let s = DiffusionSchedule::default();
        let p = NoisedGaussian::new(vec![0.0], &Matrix::identity(1), s).unwrap();
        let q = NoisedGaussian::new(vec![1.0], &Matrix::identity(1), s).unwrap();
        let cov = CovarianceMatrix::identity(VariablePartition::uniform(1, 1).unwrap());
        let data = sample(&cov, 10_000, &mut RngStream::new(1, 0)).unwrap();
        let o = McOptions {
            stratified: true,
            ..opts(5)
        };
        let kl = kl_divergence(&p, &q, &data, &s, &o).unwrap();
        assert!((kl.value - 0.5).abs() <= 3.0 * kl.std_error.max(1e-3), "{kl:?}");
    }

    #[test]
    fn more_steps_extend_the_same_draws() {
        let cov = equicorrelated(3, 0.5);
        let (src, data) = setup(&cov, 1);
        let one = |k| {
            let o = McOptions {
                mc_steps: k,
                ..opts(1)
            };
            estimate_tc(&src, &data, &o).unwrap().value * k as f64
        };
        // contributions are non-negative, so nested sums cannot shrink
        let sums: Vec<f64> = (1..=6).map(one).collect();
        assert!(sums.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{sums:?}");
    }

    #[test]
    fn gradient_n3_equals_oinfo() {
        let cov = build_redundant_cov(3, 1, 0.6).unwrap();
        let truth = measures(&cov).unwrap().o_info;
        let (src, data) = setup(&cov, 5_000);
        for f in [GradientFormulation::MutualInformation, GradientFormulation::Subsystem] {
            let g = estimate_gradient(&src, 0, &data, &opts(5), f).unwrap();
            assert!((g.value - truth).abs() <= 3.0 * g.std_error.max(3e-3), "{f:?}: {g:?} vs {truth}");
        }
        let two = equicorrelated(2, 0.5);
        let (src2, data2) = setup(&two, 10);
        assert!(estimate_gradient(&src2, 0, &data2, &opts(1), GradientFormulation::default()).is_err());
    }

    #[test]
    fn partition_mismatch_rejected() {
        let cov = equicorrelated(3, 0.5);
        let (src, _) = setup(&cov, 10);
        let other = sample(&equicorrelated(2, 0.5), 10, &mut RngStream::new(0, 0)).unwrap();
        assert!(estimate_tc(&src, &other, &opts(1)).is_err());
    }
}
