//! Variance-preserving noising process: linear `β(t)` schedule, Gaussian
//! perturbation kernel, and time sampling for the Monte-Carlo integrals over
//! the diffusion time.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::RngStream;

/// Number of nodes in the tabulated importance-sampling CDF.
pub const IMPORTANCE_TABLE_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    /// Horizon `T`; `X_T` is treated as pure noise.
    pub t_max: f64,
    /// Lower integration limit, keeps `1/σ_t` finite.
    pub t_min: f64,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        DiffusionSchedule {
            beta_min: 0.1,
            beta_max: 20.0,
            t_max: 1.0,
            t_min: 1e-5,
        }
    }
}

/// Mean/std of the perturbation kernel `x_t = α_t x + σ_t ε` and the squared
/// diffusion coefficient `g_t² = β(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCoeffs {
    pub alpha: f64,
    pub sigma: f64,
    pub g2: f64,
}

impl DiffusionSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max) {
            return Err(Error::Config(format!(
                "schedule needs 0 < t_min < t_max, got t_min={} t_max={}",
                self.t_min, self.t_max
            )));
        }
        if !(self.beta_min > 0.0 && self.beta_max >= self.beta_min) {
            return Err(Error::Config(format!(
                "schedule needs beta_max >= beta_min > 0, got {} / {}",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    /// `∫₀ᵗ β(s) ds`.
    pub fn integrated_beta(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * t * t * (self.beta_max - self.beta_min)
    }

    /// Kernel coefficients without the range check; valid for any `t ≥ 0`.
    pub fn coeffs_unchecked(&self, t: f64) -> KernelCoeffs {
        let b = self.integrated_beta(t);
        KernelCoeffs {
            alpha: (-0.5 * b).exp(),
            sigma: (-(-b).exp_m1()).sqrt(),
            g2: self.beta(t),
        }
    }

    pub fn coeffs(&self, t: f64) -> Result<KernelCoeffs> {
        self.check_time(t)?;
        Ok(self.coeffs_unchecked(t))
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        // tolerate round-off at the interval ends
        let slack = 1e-12 * self.t_max;
        if !(t >= self.t_min - slack && t <= self.t_max + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                t_min: self.t_min,
                t_max: self.t_max,
            });
        }
        Ok(())
    }

    /// `∫ g²/σ² dt` from `t_min` to `t`, in closed form `ln(e^{B(t)} − 1) − ln(e^{B(t_min)} − 1)`.
    pub fn snr_weight_integral(&self, t: f64) -> f64 {
        let f = |s: f64| self.integrated_beta(s).exp_m1().ln();
        f(t) - f(self.t_min)
    }
}

/// Perturbs each row `x[r]` at its own time `t[r]` with noise `eps[r]`.
///
/// Returns `(x_t, dsm_target)` where the target is the kernel score `−ε/σ_t`.
pub fn perturb(
    x: ArrayView2<'_, f64>,
    t: &[f64],
    eps: ArrayView2<'_, f64>,
    schedule: &DiffusionSchedule,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x.dim() != eps.dim() || x.nrows() != t.len() {
        return Err(Error::Shape(format!(
            "perturb: x {:?}, eps {:?}, {} times",
            x.dim(),
            eps.dim(),
            t.len()
        )));
    }
    let mut xt = Array2::zeros(x.raw_dim());
    let mut target = Array2::zeros(x.raw_dim());
    for (r, &tr) in t.iter().enumerate() {
        let k = schedule.coeffs(tr)?;
        Zip::from(xt.row_mut(r))
            .and(target.row_mut(r))
            .and(x.row(r))
            .and(eps.row(r))
            .for_each(|o, s, &xv, &e| {
                *o = k.alpha * xv + k.sigma * e;
                *s = -e / k.sigma;
            });
    }
    Ok((xt, target))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSampling {
    /// `t ~ U[t_min, T]`, weight `T − t_min`.
    Uniform,
    /// `t` drawn with density `∝ g²(t)/σ²(t)`, weight `1/q(t)`.
    #[default]
    Importance,
}

/// Draws integration times and their importance weights, so that
/// `mean(weight · f(t))` is unbiased for `∫_{t_min}^{T} f(t) dt`.
#[derive(Debug, Clone)]
pub struct TimeSampler {
    mode: TimeSampling,
    schedule: DiffusionSchedule,
    // tabulated importance CDF: node times and normalized cumulative mass
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl TimeSampler {
    pub fn new(schedule: DiffusionSchedule, mode: TimeSampling) -> Result<Self> {
        schedule.validate()?;
        let (nodes, cdf) = match mode {
            TimeSampling::Uniform => (Vec::new(), Vec::new()),
            TimeSampling::Importance => {
                // geometric spacing resolves the ~1/t mass near t_min
                let n = IMPORTANCE_TABLE_SIZE;
                let ratio = (schedule.t_max / schedule.t_min).ln();
                let mut nodes: Vec<f64> = (0..n)
                    .map(|k| schedule.t_min * (ratio * k as f64 / (n - 1) as f64).exp())
                    .collect();
                nodes[0] = schedule.t_min;
                nodes[n - 1] = schedule.t_max;
                let total = schedule.snr_weight_integral(schedule.t_max);
                let mut cdf: Vec<f64> = nodes
                    .iter()
                    .map(|&t| schedule.snr_weight_integral(t) / total)
                    .collect();
                cdf[0] = 0.0;
                cdf[n - 1] = 1.0;
                (nodes, cdf)
            }
        };
        Ok(TimeSampler {
            mode,
            schedule,
            nodes,
            cdf,
        })
    }

    pub fn mode(&self) -> TimeSampling {
        self.mode
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    /// Returns `(t, weight)`.
    pub fn sample(&self, rng: &mut RngStream) -> (f64, f64) {
        self.at_quantile(rng.uniform())
    }

    /// The time at proposal quantile `u ∈ [0, 1)` and its weight.
    pub fn at_quantile(&self, u: f64) -> (f64, f64) {
        let s = &self.schedule;
        match self.mode {
            TimeSampling::Uniform => {
                let span = s.t_max - s.t_min;
                (s.t_min + u * span, span)
            }
            TimeSampling::Importance => {
                let k = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
                let (c0, c1) = (self.cdf[k], self.cdf[k + 1]);
                let (t0, t1) = (self.nodes[k], self.nodes[k + 1]);
                let frac = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
                let t = t0 + frac * (t1 - t0);
                // the sampler's exact density is piecewise constant between nodes
                let density = (c1 - c0) / (t1 - t0);
                (t, 1.0 / density)
            }
        }
    }

    pub fn sample_many(&self, n: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
        (0..n).map(|_| self.sample(rng)).unzip()
    }
}
