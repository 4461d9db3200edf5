//! Multiclass gradient-boosted trees with exact or histogram split finding.
//!
//! Both strategies share the objective, gain, tie rules and depth-wise
//! growth; only the split search differs.

pub mod binning;
pub mod exact;
pub mod histogram;
pub mod objective;
pub mod split;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use binning::{build_bins, BinnedMatrix};
pub use histogram::best_split_histogram;
pub use objective::{argmax, log_loss, softmax, softmax_grad_hess};
pub use split::{best_split_exact, Split, SplitParams};
pub use tree::TreeNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    Exact,
    Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub num_trees_per_class: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    pub strategy: SplitStrategy,
    pub num_bins: usize,
    pub rng_seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            num_trees_per_class: 120,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
            strategy: SplitStrategy::Histogram,
            num_bins: 255,
            rng_seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees_per_class < 1 {
            return Err(Error::config("gbdt.num_trees_per_class", "must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("gbdt.learning_rate", "must be > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("gbdt.lambda", "must be >= 0"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::config("gbdt.gamma", "must be >= 0"));
        }
        if !(self.min_child_hessian.is_finite() && self.min_child_hessian >= 0.0) {
            return Err(Error::config("gbdt.min_child_hessian", "must be >= 0"));
        }
        if !(2..=binning::MAX_BINS).contains(&self.num_bins) {
            return Err(Error::config("gbdt.num_bins", "must be in 2..=256"));
        }
        Ok(())
    }

    pub fn split_params(&self) -> SplitParams {
        SplitParams {
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_hessian: self.min_child_hessian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtEnsemble {
    pub config: GbdtConfig,
    pub num_classes: usize,
    pub num_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_boundaries: Option<Vec<Vec<f64>>>,
    /// `trees[round][class]`
    pub trees: Vec<Vec<TreeNode>>,
}

/// Per-round callback payload: round index (0-based) and training logits.
pub struct RoundInfo<'a> {
    pub round: usize,
    pub logits: &'a [f64],
}

pub fn train(x: &Matrix, y: &[usize], num_classes: usize, config: &GbdtConfig) -> Result<GbdtEnsemble> {
    train_with(x, y, num_classes, config, |_| {})
}

/// Train, calling `on_round` after every boosting round.
pub fn train_with(
    x: &Matrix,
    y: &[usize],
    num_classes: usize,
    config: &GbdtConfig,
    mut on_round: impl FnMut(RoundInfo<'_>),
) -> Result<GbdtEnsemble> {
    config.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if num_classes < 2 {
        return Err(Error::InvalidData("need at least two classes".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= num_classes) {
        return Err(Error::InvalidData(format!("label {bad} out of range")));
    }
    let mut present = vec![false; num_classes];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::InvalidData("training set has a single class".into()));
    }
    if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("training value at row {}", i / x.cols().max(1))));
    }

    enum Prepared {
        Exact(exact::Presorted),
        Histogram(BinnedMatrix),
    }
    let prepared = match config.strategy {
        SplitStrategy::Exact => Prepared::Exact(exact::Presorted::new(x)),
        SplitStrategy::Histogram => Prepared::Histogram(BinnedMatrix::from_matrix(x, config.num_bins)),
    };

    let k = num_classes;
    let params = config.split_params();
    let mut logits = vec![0.0; n * k];
    let mut grads = vec![vec![0.0; n]; k];
    let mut hess = vec![vec![0.0; n]; k];
    let mut trees = Vec::with_capacity(config.num_trees_per_class);
    let mut p = vec![0.0; k];

    for round in 0..config.num_trees_per_class {
        for row in 0..n {
            p.copy_from_slice(&logits[row * k..(row + 1) * k]);
            objective::softmax_in_place(&mut p);
            for c in 0..k {
                grads[c][row] = p[c] - if c == y[row] { 1.0 } else { 0.0 };
                hess[c][row] = (p[c] * (1.0 - p[c])).max(objective::MIN_HESSIAN);
            }
        }
        let fitted: Vec<(TreeNode, Vec<f64>)> = (0..k)
            .into_par_iter()
            .map(|c| match &prepared {
                Prepared::Exact(pre) => exact::grow(x, pre, &grads[c], &hess[c], params, config.max_depth),
                Prepared::Histogram(b) => histogram::grow(b, &grads[c], &hess[c], params, config.max_depth),
            })
            .collect();
        let mut round_trees = Vec::with_capacity(k);
        for (c, (tree, out)) in fitted.into_iter().enumerate() {
            for (row, w) in out.into_iter().enumerate() {
                logits[row * k + c] += config.learning_rate * w;
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
        on_round(RoundInfo { round, logits: &logits });
    }

    Ok(GbdtEnsemble {
        config: config.clone(),
        num_classes: k,
        num_features: x.cols(),
        bin_boundaries: match prepared {
            Prepared::Histogram(b) => Some(b.into_boundaries()),
            Prepared::Exact(_) => None,
        },
        trees,
    })
}

impl GbdtEnsemble {
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features {
            return Err(Error::Dimension {
                expected: self.num_features,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.num_classes];
        for round in &self.trees {
            for (o, tree) in out.iter_mut().zip(round) {
                *o += self.config.learning_rate * tree.predict(x);
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let p = self.predict_proba(x)?;
        Ok((argmax(&p), p))
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<usize>> {
        (0..x.rows())
            .into_par_iter()
            .map(|r| self.predict(x.row(r)).map(|(c, _)| c))
            .collect()
    }

    /// Copy keeping only the first `rounds` boosting rounds.
    pub fn truncated(&self, rounds: usize) -> GbdtEnsemble {
        let mut out = self.clone();
        out.trees.truncate(rounds);
        out.config.num_trees_per_class = out.trees.len();
        out
    }

    pub fn validate(&self) -> Result<()> {
        for round in &self.trees {
            if round.len() != self.num_classes {
                return Err(Error::InvalidData("round with wrong tree count".into()));
            }
            for t in round {
                if !t.all_finite() || t.max_feature().is_some_and(|f| f >= self.num_features) {
                    return Err(Error::InvalidData("malformed tree".into()));
                }
            }
        }
        Ok(())
    }
}
