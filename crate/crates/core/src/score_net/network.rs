//! Residual MLP noise predictor with per-variable time conditioning and a
//! hand-written reverse pass.
//!
//! Layout, for input `x` (B×D) and noise times `τ` (B×N):
//!
//! ```text
//! c   = embed(τ/T) · W_time + b_time          (N sinusoidal embeddings, concatenated)
//! h₀  = x · W_in + b_in
//! hₖ₊₁ = hₖ + silu(silu(hₖ + c) · W1ₖ + b1ₖ) · W2ₖ + b2ₖ
//! F   = silu(h_L) · W_out + b_out
//! ε̂   = F                                     (plain)
//! ε̂ᵢ  = σ(τᵢ)·xᵢ + α(τᵢ)·Fᵢ                  (Gaussian skip)
//! ```
//!
//! With the skip, an untrained network is the exact noise predictor for
//! independent unit-variance Gaussian data and `F` only models the departure
//! from it.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::math::{ParamStore, RngStream};
use crate::systems::VariablePartition;

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub width: usize,
    pub n_blocks: usize,
    pub time_embed_dim: usize,
    /// Predict `σ·x + α·F` instead of `F`.
    #[serde(default)]
    pub gaussian_skip: bool,
}

impl NetConfig {
    /// Width and embedding size by total data dimension: 128 up to 50, 192 up
    /// to 100, 256 above; 4 residual blocks. Gradient-capable models double
    /// the width.
    pub fn for_dimension(total_dim: usize, with_gradients: bool) -> Self {
        let base = match total_dim {
            0..=50 => 128,
            51..=100 => 192,
            _ => 256,
        };
        NetConfig {
            width: if with_gradients { 2 * base } else { base },
            n_blocks: 4,
            time_embed_dim: base,
            gaussian_skip: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.n_blocks == 0 || self.time_embed_dim < 2 {
            return Err(Error::Config(format!(
                "network needs width >= 1, n_blocks >= 1, time_embed_dim >= 2; got {self:?}"
            )));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Parameter slots of the network inside its [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
struct Slots {
    w_in: usize,
    b_in: usize,
    w_time: usize,
    b_time: usize,
    blocks: Vec<[usize; 4]>,
    w_out: usize,
    b_out: usize,
}

/// Noise-prediction network for a system of `n_vars` variables and total
/// dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNet {
    config: NetConfig,
    dim: usize,
    n_vars: usize,
    schedule: DiffusionSchedule,
    /// Variable owning each input column.
    col_var: Vec<usize>,
    params: ParamStore,
    slots: Slots,
}

/// Activations kept for the reverse pass.
struct Trace {
    emb: Array2<f64>,
    pre: Vec<Array2<f64>>,
    z: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    h_last: Array2<f64>,
    /// `∂ε̂/∂F` under the Gaussian skip.
    alpha: Option<Array2<f64>>,
}

impl ScoreNet {
    /// Gaussian fan-in initialization; the output layer starts at zero so an
    /// untrained network predicts no noise.
    pub fn new(
        config: NetConfig,
        partition: &VariablePartition,
        schedule: DiffusionSchedule,
        rng: &mut RngStream,
    ) -> Result<Self> {
        config.validate()?;
        let (dim, n_vars) = (partition.total_dim(), partition.n_vars());
        let col_var = (0..n_vars).flat_map(|v| partition.range(v).map(move |_| v)).collect();
        let h = config.width;
        let e = config.time_embed_dim;
        let mut params = ParamStore::new();
        let mut init = |rows: usize, cols: usize, gain: f64| {
            let std = gain / (rows as f64).sqrt();
            rng.normal_matrix(rows, cols) * std
        };
        let w_in = params.push("input.weight", init(dim, h, 1.0));
        let b_in = params.push("input.bias", Array2::zeros((1, h)));
        let w_time = params.push("time.weight", init(n_vars * e, h, 1.0));
        let b_time = params.push("time.bias", Array2::zeros((1, h)));
        let mut blocks = Vec::with_capacity(config.n_blocks);
        for k in 0..config.n_blocks {
            let w1 = params.push(format!("block{k}.fc1.weight"), init(h, h, 1.0));
            let b1 = params.push(format!("block{k}.fc1.bias"), Array2::zeros((1, h)));
            let w2 = params.push(format!("block{k}.fc2.weight"), init(h, h, 0.5));
            let b2 = params.push(format!("block{k}.fc2.bias"), Array2::zeros((1, h)));
            blocks.push([w1, b1, w2, b2]);
        }
        let w_out = params.push("output.weight", Array2::zeros((h, dim)));
        let b_out = params.push("output.bias", Array2::zeros((1, dim)));
        Ok(ScoreNet {
            config,
            dim,
            n_vars,
            schedule,
            col_var,
            params,
            slots: Slots {
                w_in,
                b_in,
                w_time,
                b_time,
                blocks,
                w_out,
                b_out,
            },
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Copy of this network carrying different parameter values.
    pub fn with_values(&self, values: Vec<Array2<f64>>) -> Result<ScoreNet> {
        let mut net = self.clone();
        net.params.load_values(values)?;
        Ok(net)
    }

    fn embed(&self, tau: ArrayView2<'_, f64>) -> Array2<f64> {
        let e = self.config.time_embed_dim;
        let half = e / 2;
        let freqs: Vec<f64> = (0..half)
            .map(|k| {
                let frac = if half > 1 { k as f64 / (half - 1) as f64 } else { 0.0 };
                (frac * 1000f64.ln()).exp()
            })
            .collect();
        let mut out = Array2::zeros((tau.nrows(), self.n_vars * e));
        for (r, row) in tau.outer_iter().enumerate() {
            for (v, &tv) in row.iter().enumerate() {
                let s = tv / self.schedule.t_max;
                let base = v * e;
                for (k, &f) in freqs.iter().enumerate() {
                    out[[r, base + k]] = (s * f).sin();
                    out[[r, base + half + k]] = (s * f).cos();
                }
            }
        }
        out
    }

    fn check_inputs(&self, input: ArrayView2<'_, f64>, tau: ArrayView2<'_, f64>) -> Result<()> {
        if input.ncols() != self.dim || tau.ncols() != self.n_vars || input.nrows() != tau.nrows() {
            return Err(Error::Shape(format!(
                "network expects (B×{}, B×{}), got {:?} and {:?}",
                self.dim,
                self.n_vars,
                input.dim(),
                tau.dim()
            )));
        }
        Ok(())
    }

    fn run(&self, input: ArrayView2<'_, f64>, tau: ArrayView2<'_, f64>, keep: bool) -> (Array2<f64>, Option<Trace>) {
        let p = &self.params;
        let sl = &self.slots;
        let emb = self.embed(tau);
        let cond = emb.dot(p.value(sl.w_time)) + p.value(sl.b_time);
        let mut h = input.dot(p.value(sl.w_in)) + p.value(sl.b_in);
        let mut pre = Vec::new();
        let mut zs = Vec::new();
        let mut vs = Vec::new();
        for &[w1, b1, w2, b2] in &sl.blocks {
            let a = &h + &cond;
            let u = a.mapv(silu);
            let z = u.dot(p.value(w1)) + p.value(b1);
            let v = z.mapv(silu);
            h = h + v.dot(p.value(w2)) + p.value(b2);
            if keep {
                pre.push(a);
                zs.push(z);
                vs.push(v);
            }
        }
        let mut out = h.mapv(silu).dot(p.value(sl.w_out)) + p.value(sl.b_out);
        let alpha = self.config.gaussian_skip.then(|| {
            let mut alpha = Array2::zeros(out.raw_dim());
            for r in 0..out.nrows() {
                for (c, &v) in self.col_var.iter().enumerate() {
                    let k = self.schedule.coeffs_unchecked(tau[[r, v]]);
                    alpha[[r, c]] = k.alpha;
                    out[[r, c]] = k.sigma * input[[r, c]] + k.alpha * out[[r, c]];
                }
            }
            alpha
        });
        let trace = keep.then(|| Trace {
            emb,
            pre,
            z: zs,
            v: vs,
            h_last: h,
            alpha,
        });
        (out, trace)
    }

    /// Noise prediction for every coordinate of every row.
    pub fn forward(&self, input: ArrayView2<'_, f64>, tau: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_inputs(input, tau)?;
        let (out, _) = self.run(input, tau, false);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(out)
    }

    /// Mean squared error between predicted and true noise over the masked
    /// columns; accumulates parameter gradients into the store (which are
    /// zeroed first) and returns the loss.
    pub fn loss_and_backward(
        &mut self,
        input: ArrayView2<'_, f64>,
        tau: ArrayView2<'_, f64>,
        target: ArrayView2<'_, f64>,
        mask_cols: &[usize],
    ) -> Result<f64> {
        self.check_inputs(input, tau)?;
        if target.dim() != input.dim() {
            return Err(Error::Shape("noise target must match input shape".into()));
        }
        if mask_cols.is_empty() {
            return Err(Error::InvalidArgument("loss mask selects no coordinates".into()));
        }
        let (out, trace) = self.run(input, tau, true);
        let trace = trace.expect("trace requested");
        let count = (input.nrows() * mask_cols.len()) as f64;
        let mut d_out = Array2::zeros(out.raw_dim());
        let mut loss = 0.0;
        for &c in mask_cols {
            for r in 0..out.nrows() {
                let diff = out[[r, c]] - target[[r, c]];
                loss += diff * diff;
                d_out[[r, c]] = 2.0 * diff / count;
            }
        }
        loss /= count;
        self.backward(input, &trace, d_out);
        Ok(loss)
    }

    fn backward(&mut self, input: ArrayView2<'_, f64>, trace: &Trace, mut d_out: Array2<f64>) {
        if let Some(alpha) = &trace.alpha {
            d_out *= alpha;
        }
        let sl = self.slots.clone();
        let p = &mut self.params;
        p.zero_grads();
        let sum_rows = |m: &Array2<f64>| m.sum_axis(Axis(0)).insert_axis(Axis(0));

        let q = trace.h_last.mapv(silu);
        *p.grad_mut(sl.w_out) += &q.t().dot(&d_out);
        *p.grad_mut(sl.b_out) += &sum_rows(&d_out);
        let mut dh = d_out.dot(&p.value(sl.w_out).t());
        Zip::from(&mut dh)
            .and(&trace.h_last)
            .for_each(|g, &x| *g *= silu_grad(x));

        let mut d_cond = Array2::<f64>::zeros(dh.raw_dim());
        for (k, &[w1, b1, w2, b2]) in sl.blocks.iter().enumerate().rev() {
            let v = &trace.v[k];
            let z = &trace.z[k];
            let a = &trace.pre[k];
            *p.grad_mut(w2) += &v.t().dot(&dh);
            *p.grad_mut(b2) += &sum_rows(&dh);
            let mut dz = dh.dot(&p.value(w2).t());
            Zip::from(&mut dz).and(z).for_each(|g, &x| *g *= silu_grad(x));
            let u = a.mapv(silu);
            *p.grad_mut(w1) += &u.t().dot(&dz);
            *p.grad_mut(b1) += &sum_rows(&dz);
            let mut da = dz.dot(&p.value(w1).t());
            Zip::from(&mut da).and(a).for_each(|g, &x| *g *= silu_grad(x));
            dh += &da;
            d_cond += &da;
        }
        *p.grad_mut(sl.w_in) += &input.t().dot(&dh);
        *p.grad_mut(sl.b_in) += &sum_rows(&dh);
        *p.grad_mut(sl.w_time) += &trace.emb.t().dot(&d_cond);
        *p.grad_mut(sl.b_time) += &sum_rows(&d_cond);
    }

    /// Loss only, no gradient bookkeeping.
    pub fn loss(
        &self,
        input: ArrayView2<'_, f64>,
        tau: ArrayView2<'_, f64>,
        target: ArrayView2<'_, f64>,
        mask_cols: &[usize],
    ) -> Result<f64> {
        let out = self.forward(input, tau)?;
        let sel = out.select(Axis(1), mask_cols) - target.select(Axis(1), mask_cols);
        Ok(sel.mapv(|d| d * d).mean().unwrap_or(0.0))
    }
}
