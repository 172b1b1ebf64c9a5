//! Parameter storage and the Adam optimizer with an exponential moving
//! average of the weights.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named parameter arrays, each paired with a gradient slot of the same shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    grads: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter and returns its slot index.
    pub fn push(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.grads.push(Array2::zeros(value.raw_dim()));
        self.values.push(value);
        self.names.push(name.into());
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    pub fn name(&self, slot: usize) -> &str {
        &self.names[slot]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, slot: usize) -> &Array2<f64> {
        &self.values[slot]
    }

    pub fn value_mut(&mut self, slot: usize) -> &mut Array2<f64> {
        &mut self.values[slot]
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn grad(&self, slot: usize) -> &Array2<f64> {
        &self.grads[slot]
    }

    pub fn grad_mut(&mut self, slot: usize) -> &mut Array2<f64> {
        &mut self.grads[slot]
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Replaces all parameter values; shapes must match.
    pub fn load_values(&mut self, values: Vec<Array2<f64>>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter arrays, got {}",
                self.values.len(),
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if v.dim() != self.values[i].dim() {
                return Err(Error::Shape(format!(
                    "parameter `{}` has shape {:?}, got {:?}",
                    self.names[i],
                    self.values[i].dim(),
                    v.dim()
                )));
            }
        }
        self.values = values;
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, v) in self.names.iter().zip(&self.values) {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("parameter `{name}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decay of the weight moving average; 0 makes the average track the
    /// latest parameters exactly.
    pub ema_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            ema_decay: 0.999,
        }
    }
}

/// Adam moments plus EMA shadow weights.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    ema: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                config.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&config.ema_decay) {
            return Err(Error::InvalidArgument(format!(
                "ema decay must lie in [0, 1), got {}",
                config.ema_decay
            )));
        }
        let zeros = || params.values().iter().map(|v| Array2::zeros(v.raw_dim())).collect();
        Ok(AdamState {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
            ema: params.values().to_vec(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn ema(&self) -> &[Array2<f64>] {
        &self.ema
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one Adam update from the gradients stored in `params`, then
    /// moves the EMA shadow toward the new weights.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        for slot in 0..params.len() {
            if params.grad(slot).iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(params.name(slot).to_string()));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            ema_decay,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        for slot in 0..params.len() {
            let grad = params.grads[slot].view();
            Zip::from(&mut params.values[slot])
                .and(&mut self.m[slot])
                .and(&mut self.v[slot])
                .and(&grad)
                .for_each(|w, m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                });
            Zip::from(&mut self.ema[slot])
                .and(&params.values[slot])
                .for_each(|e, &w| *e = ema_decay * *e + (1.0 - ema_decay) * w);
        }
        params.check_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single(value: f64) -> ParamStore {
        let mut p = ParamStore::new();
        p.push("w", array![[value]]);
        p
    }

    #[test]
    fn zero_gradient_keeps_params_and_moves_ema() {
        let mut p = single(1.0);
        let mut opt = AdamState::new(&p, AdamConfig::default()).unwrap();
        // offset the shadow so it has somewhere to move
        opt.ema[0][[0, 0]] = 0.0;
        for _ in 0..10 {
            opt.step(&mut p).unwrap();
        }
        assert_eq!(p.value(0)[[0, 0]], 1.0);
        let e = opt.ema()[0][[0, 0]];
        assert!(e > 0.0 && e < 1.0);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut p = single(0.0);
        let mut opt = AdamState::new(&p, AdamConfig::default()).unwrap();
        for _ in 0..50 {
            p.grad_mut(0).fill(2.5);
            opt.step(&mut p).unwrap();
        }
        assert!(p.value(0)[[0, 0]] < 0.0);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let target = 3.0;
        let mut p = single(-2.0);
        let config = AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        };
        let mut opt = AdamState::new(&p, config).unwrap();
        let mut steps = 0;
        while steps < 5000 {
            let w = p.value(0)[[0, 0]];
            p.grad_mut(0).fill(2.0 * (w - target));
            opt.step(&mut p).unwrap();
            steps += 1;
        }
        assert!((p.value(0)[[0, 0]] - target).abs() < 1e-3);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = ParamStore::new();
        p.push("layer.bias", array![[0.0, 1.0]]);
        let mut opt = AdamState::new(&p, AdamConfig::default()).unwrap();
        p.grad_mut(0)[[0, 1]] = f64::NAN;
        let err = opt.step(&mut p).unwrap_err();
        assert!(err.to_string().contains("layer.bias"));
    }

    #[test]
    fn ema_zero_decay_tracks_params() {
        let mut p = single(0.5);
        let config = AdamConfig {
            ema_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut opt = AdamState::new(&p, config).unwrap();
        p.grad_mut(0).fill(1.0);
        opt.step(&mut p).unwrap();
        assert_eq!(opt.ema()[0], *p.value(0));
    }

    #[test]
    fn rejects_bad_config() {
        let p = single(0.0);
        let bad = AdamConfig {
            learning_rate: 0.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(&p, bad).is_err());
    }
}
