//! Single-hidden-layer rectifier MLP trained with mini-batch Adam, L2 weight
//! penalty (biases excluded), and patience-based early stopping on a seeded
//! validation slice.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{derive_seed, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 100,
            l2: 0.01,
            max_epochs: 500,
            patience: 10,
            val_fraction: 0.1,
            learning_rate: 1e-3,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// input -> hidden weights, row-major (hidden x input).
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// hidden -> output weights.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub n_features: usize,
    pub hidden: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
}

/// Gradients aligned with the model's parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpModel {
    /// Fresh network with fan-in-scaled uniform weights and zero biases.
    pub fn init_random(n_features: usize, hidden: usize, seed: Seed) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mlp-init", 0).0);
        let s1 = 1.0 / (n_features as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        MlpModel {
            w1: (0..hidden * n_features)
                .map(|_| rng.gen_range(-s1..s1))
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.gen_range(-s2..s2)).collect(),
            b2: 0.0,
            n_features,
            hidden,
            epochs_run: 0,
            best_val_loss: f64::INFINITY,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let mut z = self.b1[j];
            let w_row = &self.w1[j * self.n_features..(j + 1) * self.n_features];
            for (w, x) in w_row.iter().zip(row) {
                z += w * x;
            }
            if z > 0.0 {
                out += self.w2[j] * z;
            }
        }
        out
    }

    /// Hidden pre-activations for a row (used to keep gradient-check points
    /// away from the rectifier kink).
    pub fn pre_activations(&self, row: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let mut z = self.b1[j];
                let w_row = &self.w1[j * self.n_features..(j + 1) * self.n_features];
                for (w, x) in w_row.iter().zip(row) {
                    z += w * x;
                }
                z
            })
            .collect()
    }

    /// Mean-squared-error loss plus l2 * (sum of squared weights, biases
    /// excluded), and its analytic gradient via backpropagation.
    pub fn loss_and_gradient(
        &self,
        x: &[Vec<f64>],
        y: &[f64],
        l2: f64,
    ) -> Result<(f64, MlpGradient)> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::EmptyInput("loss requires aligned non-empty x, y".into()));
        }
        let n = x.len() as f64;
        let p = self.n_features;
        let mut grad = MlpGradient {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.hidden],
            b2: 0.0,
        };
        let mut loss = 0.0;
        let mut act = vec![0.0; self.hidden];
        for (row, &yi) in x.iter().zip(y) {
            if row.len() != p {
                return Err(Error::WidthMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            let mut pred = self.b2;
            for j in 0..self.hidden {
                let mut z = self.b1[j];
                let w_row = &self.w1[j * p..(j + 1) * p];
                for (w, xv) in w_row.iter().zip(row) {
                    z += w * xv;
                }
                act[j] = if z > 0.0 { z } else { 0.0 };
                pred += self.w2[j] * act[j];
            }
            let err = pred - yi;
            loss += err * err;
            let dpred = 2.0 * err / n;
            grad.b2 += dpred;
            for j in 0..self.hidden {
                grad.w2[j] += dpred * act[j];
                if act[j] > 0.0 {
                    let dz = dpred * self.w2[j];
                    grad.b1[j] += dz;
                    for (gk, xv) in grad.w1[j * p..(j + 1) * p].iter_mut().zip(row) {
                        *gk += dz * xv;
                    }
                }
            }
        }
        loss /= n;
        let weight_sq: f64 = self.w1.iter().map(|w| w * w).sum::<f64>()
            + self.w2.iter().map(|w| w * w).sum::<f64>();
        loss += l2 * weight_sq;
        for (g, w) in grad.w1.iter_mut().zip(&self.w1) {
            *g += 2.0 * l2 * w;
        }
        for (g, w) in grad.w2.iter_mut().zip(&self.w2) {
            *g += 2.0 * l2 * w;
        }
        Ok((loss, grad))
    }

    fn validation_mse(&self, x: &[Vec<f64>], y: &[f64], indices: &[usize]) -> f64 {
        let n = indices.len() as f64;
        indices
            .iter()
            .map(|&i| {
                let e = self.predict_row(&x[i]) - y[i];
                e * e
            })
            .sum::<f64>()
            / n
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

pub fn fit_mlp(x: &[Vec<f64>], y: &[f64], config: MlpConfig, seed: Seed) -> Result<MlpModel> {
    let n = x.len();
    if n < 10 {
        return Err(Error::EmptyInput(format!(
            "fit_mlp requires n >= 10 so a validation slice exists, got {n}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let p = x[0].len();
    let mut model = MlpModel::init_random(p, config.hidden, seed);

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mlp-split", 0).0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut shuffle_rng);
    let n_val = ((config.val_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    // One flat parameter vector layout: w1, b1, w2, b2.
    let n_params = model.w1.len() + model.b1.len() + model.w2.len() + 1;
    let mut adam = Adam::new(n_params);
    let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mlp-epoch", 0).0);

    let mut best = model.clone();
    let mut best_val = model.validation_mse(x, y, &val_idx);
    let mut bad_epochs = 0usize;
    let mut epochs_run = 0usize;

    let mut batch_order = train_idx.clone();
    for _epoch in 0..config.max_epochs {
        batch_order.shuffle(&mut epoch_rng);
        for batch in batch_order.chunks(config.batch_size.max(1)) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| x[i].clone()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let (_, grad) = model.loss_and_gradient(&bx, &by, config.l2)?;
            let mut flat_params: Vec<f64> = model
                .w1
                .iter()
                .chain(&model.b1)
                .chain(&model.w2)
                .chain(std::iter::once(&model.b2))
                .copied()
                .collect();
            let flat_grads: Vec<f64> = grad
                .w1
                .iter()
                .chain(&grad.b1)
                .chain(&grad.w2)
                .chain(std::iter::once(&grad.b2))
                .copied()
                .collect();
            adam.step(&mut flat_params, &flat_grads, config.learning_rate);
            let (w1_len, b1_len, w2_len) = (model.w1.len(), model.b1.len(), model.w2.len());
            model.w1.copy_from_slice(&flat_params[..w1_len]);
            model.b1.copy_from_slice(&flat_params[w1_len..w1_len + b1_len]);
            model
                .w2
                .copy_from_slice(&flat_params[w1_len + b1_len..w1_len + b1_len + w2_len]);
            model.b2 = flat_params[n_params - 1];
        }
        epochs_run += 1;
        let val = model.validation_mse(x, y, &val_idx);
        if val < best_val {
            best_val = val;
            best = model.clone();
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= config.patience {
                break;
            }
        }
    }

    let mut out = best;
    out.epochs_run = epochs_run;
    out.best_val_loss = best_val;
    Ok(out)
}
