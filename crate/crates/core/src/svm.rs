//! Linear one-vs-rest soft-margin SVM trained by stochastic subgradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::argmax;
use crate::matrix::Matrix;
use crate::standardize::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub eta0: f64,
    pub decay: f64,
    pub rng_seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 30,
            eta0: 0.01,
            decay: 1e-4,
            rng_seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::config("svm.c", "must be > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::config("svm.epochs", "must be >= 1"));
        }
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(Error::config("svm.eta0", "must be > 0"));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::config("svm.decay", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub standardizer: Standardizer,
    pub config: SvmConfig,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `½‖w‖² + c Σ max(0, 1 − y (w·x + b))` for labels `±1`.
pub fn objective(w: &[f64], b: f64, x: &Matrix, y: &[f64], c: f64) -> f64 {
    let hinge: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &yi)| (1.0 - yi * (dot(w, row) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Binary hinge-loss fit on standardized rows. Returns the best iterate seen
/// at epoch ends, the zero model included.
fn fit_binary(x: &Matrix, y: &[f64], config: &SvmConfig, stream: u64) -> (Vec<f64>, f64) {
    let (n, d) = (x.rows(), x.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(stream);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (w.clone(), b, objective(&w, b, x, y, config.c));
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    let reg = 1.0 / n as f64;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = config.eta0 / (1.0 + config.decay * t as f64);
            let row = x.row(i);
            let margin = y[i] * (dot(&w, row) + b);
            let shrink = 1.0 - eta * reg;
            if margin < 1.0 {
                let step = eta * config.c * y[i];
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj = *wj * shrink + step * xj;
                }
                b += step;
            } else {
                w.iter_mut().for_each(|wj| *wj *= shrink);
            }
            t += 1;
        }
        let obj = objective(&w, b, x, y, config.c);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    (best.0, best.1)
}

pub fn train(x: &Matrix, y: &[usize], num_classes: usize, config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    if x.rows() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if num_classes < 2 || y.iter().any(|&c| c >= num_classes) {
        return Err(Error::InvalidData("labels out of range".into()));
    }
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.transform(x);
    let fits: Vec<(Vec<f64>, f64)> = (0..num_classes)
        .into_par_iter()
        .map(|k| {
            let yk: Vec<f64> = y.iter().map(|&c| if c == k { 1.0 } else { -1.0 }).collect();
            fit_binary(&z, &yk, config, k as u64)
        })
        .collect();
    let (weights, biases) = fits.into_iter().unzip();
    Ok(SvmModel {
        weights,
        biases,
        standardizer,
        config: config.clone(),
    })
}

impl SvmModel {
    pub fn num_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features() {
            return Err(Error::Dimension {
                expected: self.num_features(),
                got: x.len(),
            });
        }
        let z = self.standardizer.transform_row(x);
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, &z) + b)
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let s = self.scores(x)?;
        Ok((argmax(&s), s))
    }
}
