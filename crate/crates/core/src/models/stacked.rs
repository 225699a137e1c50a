//! Stacked ensemble: out-of-fold base-model predictions feed a ridge-
//! stabilized least-squares meta-learner; base models are refit on the full
//! training data before storage.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{derive_seed, Seed};

use super::{Model, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackedConfig {
    /// Base learners in fixed meta-feature order.
    pub bases: Vec<ModelSpec>,
    pub oof_folds: usize,
    /// Ridge penalty on meta coefficients (not the intercept).
    pub ridge: f64,
}

impl Default for StackedConfig {
    fn default() -> Self {
        StackedConfig {
            bases: vec![
                ModelSpec::Forest(Default::default()),
                ModelSpec::Gbm(Default::default()),
                ModelSpec::Xgb(Default::default()),
                ModelSpec::Mlp(Default::default()),
            ],
            oof_folds: 5,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub bases: Vec<Model>,
    pub meta_weights: Vec<f64>,
    pub meta_intercept: f64,
    pub oof_folds: usize,
    pub n_features: usize,
}

/// Ridge least squares with intercept; penalty applies to coefficients only.
/// Solved by Gaussian elimination on the normal equations; the system is
/// tiny (one coefficient per base model).
pub fn ridge_regression(z: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<(Vec<f64>, f64)> {
    let n = z.len();
    if n == 0 || n != y.len() {
        return Err(Error::EmptyInput("ridge_regression requires aligned rows".into()));
    }
    let k = z[0].len();
    let dim = k + 1; // intercept first
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![0.0; dim];
    a[0][0] = n as f64;
    for row in z {
        for j in 0..k {
            a[0][j + 1] += row[j];
        }
    }
    for j in 0..k {
        a[j + 1][0] = a[0][j + 1];
    }
    for row in z {
        for j in 0..k {
            for l in 0..k {
                a[j + 1][l + 1] += row[j] * row[l];
            }
        }
    }
    for j in 0..k {
        a[j + 1][j + 1] += ridge;
    }
    for (row, &yi) in z.iter().zip(y) {
        b[0] += yi;
        for j in 0..k {
            b[j + 1] += row[j] * yi;
        }
    }
    // partial-pivot elimination
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::invalid("meta", "singular normal equations"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..dim {
            let f = a[row][col] / a[col][col];
            for c in col..dim {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; dim];
    for row in (0..dim).rev() {
        let mut s = b[row];
        for c in row + 1..dim {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Ok((x[1..].to_vec(), x[0]))
}

pub fn fit_stacked(
    x: &[Vec<f64>],
    y: &[f64],
    config: StackedConfig,
    seed: Seed,
) -> Result<StackedModel> {
    let n = x.len();
    if config.bases.is_empty() {
        return Err(Error::Config("stacked ensemble needs >= 1 base model".into()));
    }
    if config.oof_folds < 2 {
        return Err(Error::Config("oof_folds must be >= 2".into()));
    }
    if n < 5 * config.oof_folds {
        return Err(Error::EmptyInput(format!(
            "fit_stacked requires n >= {} ({} folds of >= 5 rows), got {n}",
            5 * config.oof_folds,
            config.oof_folds
        )));
    }
    if x.len() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "stack-shuffle", 0).0);
    order.shuffle(&mut rng);
    let folds = contiguous_folds(&order, config.oof_folds);

    let n_bases = config.bases.len();
    let mut oof = vec![vec![0.0; n_bases]; n];
    for (f, fold) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        for (b, spec) in config.bases.iter().enumerate() {
            let base_seed = derive_seed(seed, "stack-oof", (f * n_bases + b) as u64);
            let model = spec.fit(&tx, &ty, base_seed)?;
            for &i in fold {
                oof[i][b] = model.predict(std::slice::from_ref(&x[i]))?[0];
            }
        }
    }

    let (meta_weights, meta_intercept) = ridge_regression(&oof, y, config.ridge)?;

    let bases: Vec<Model> = config
        .bases
        .iter()
        .enumerate()
        .map(|(b, spec)| spec.fit(x, y, derive_seed(seed, "stack-full", b as u64)))
        .collect::<Result<_>>()?;

    Ok(StackedModel {
        bases,
        meta_weights,
        meta_intercept,
        oof_folds: config.oof_folds,
        n_features: x[0].len(),
    })
}

pub(crate) fn contiguous_folds(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    // fold sizes differ by at most 1
    let n = order.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    folds
}

impl StackedModel {
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let mut out = self.meta_intercept;
        for (base, w) in self.bases.iter().zip(&self.meta_weights) {
            out += w * base.predict(std::slice::from_ref(&row.to_vec()))?[0];
        }
        Ok(out)
    }
}
