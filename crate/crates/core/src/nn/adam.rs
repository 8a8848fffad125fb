use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::graph::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub value: Array2<f64>,
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    /// Frozen parameters are visible to the forward pass but skipped by
    /// the optimizer and the gradient checker.
    pub frozen: bool,
}

/// Named parameters plus per-parameter Adam state. Iteration order is the
/// name order (BTreeMap), which keeps training deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    pub params: BTreeMap<String, Param>,
    pub step: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Array2<f64>) {
        let dim = value.dim();
        self.params.insert(
            name.to_string(),
            Param { value, m: Array2::zeros(dim), v: Array2::zeros(dim), frozen: false },
        );
    }

    pub fn insert_frozen(&mut self, name: &str, value: Array2<f64>) {
        self.insert(name, value);
        self.params.get_mut(name).unwrap().frozen = true;
    }

    /// Inserts a (rows x cols) parameter with scaled uniform init unless
    /// it already exists.
    pub fn get_or_init(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha12Rng,
    ) -> &Array2<f64> {
        if !self.params.contains_key(name) {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let value = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound));
            self.insert(name, value);
        }
        &self.params[name].value
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.params
            .iter()
            .filter(|(_, p)| !p.frozen)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn num_elements(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// One Adam update with bias correction over the supplied gradients.
    /// Parameters without an entry in `grads` are untouched; gradients
    /// naming an unknown or frozen parameter are an error.
    pub fn adam_step(
        &mut self,
        grads: &BTreeMap<String, Array2<f64>>,
        cfg: &AdamConfig,
    ) -> Result<(), NnError> {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        for (name, grad) in grads {
            let p = self
                .params
                .get_mut(name)
                .filter(|p| !p.frozen)
                .ok_or_else(|| NnError::MissingGradient(name.clone()))?;
            p.m.zip_mut_with(grad, |m, &g| *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g);
            p.v.zip_mut_with(grad, |v, &g| *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g);
            for ((val, &m), &v) in p.value.iter_mut().zip(p.m.iter()).zip(p.v.iter()) {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *val -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}
