//! Bootstrap-aggregated regression forests, one per target column.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::rng_for;
use crate::{derive_seed, Error, Result};

pub mod tree;

pub use tree::{best_split, fit_tree, fit_tree_on, RegressionTree, SplitChoice, TreeNode, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    /// Train each tree on a with-replacement resample of the rows.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { num_trees: 200, max_features: 5, min_samples_leaf: 2, max_depth: None, bootstrap: true }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_features: self.max_features,
            min_samples_leaf: self.min_samples_leaf,
            max_depth: self.max_depth,
        }
    }
}

/// Independent forests, one per target column, over a shared feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub num_features: usize,
    pub num_train: usize,
    /// `forests[target][tree]`.
    pub forests: Vec<Vec<RegressionTree>>,
}

/// Fits one forest per column of `y`.
pub fn fit_forest<X, Y>(x: &[X], y: &[Y], params: &ForestParams, seed: u64) -> Result<ForestModel>
where
    X: AsRef<[f64]> + Sync,
    Y: AsRef<[f64]> + Sync,
{
    if params.num_trees == 0 {
        return Err(Error::Parameter("a forest needs at least one tree".into()));
    }
    if x.is_empty() {
        return Err(Error::Parameter("cannot fit a forest on zero rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows but {} target rows", x.len(), y.len())));
    }
    let num_features = x[0].as_ref().len();
    let num_targets = y[0].as_ref().len();
    if num_targets == 0 || y.iter().any(|r| r.as_ref().len() != num_targets) {
        return Err(Error::Dimension("target rows must share a nonzero length".into()));
    }
    let columns: Vec<Vec<f64>> = (0..num_targets).map(|t| y.iter().map(|r| r.as_ref()[t]).collect()).collect();
    let n = x.len();
    let tree_params = params.tree_params();
    let jobs: Vec<(usize, usize)> = (0..num_targets).flat_map(|t| (0..params.num_trees).map(move |m| (t, m))).collect();
    let trees = jobs
        .par_iter()
        .map(|&(t, m)| {
            let tree_seed = derive_seed(derive_seed(seed, t as u64), m as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = rng_for(tree_seed, 1);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, &columns[t], rows, &tree_params, tree_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut forests: Vec<Vec<RegressionTree>> = vec![Vec::with_capacity(params.num_trees); num_targets];
    for ((t, _), tree) in jobs.into_iter().zip(trees) {
        forests[t].push(tree);
    }
    Ok(ForestModel { params: *params, num_features, num_train: n, forests })
}

impl ForestModel {
    pub fn num_targets(&self) -> usize {
        self.forests.len()
    }

    /// Mean tree output per target.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features {
            return Err(Error::Dimension(format!("model expects {} features, got {}", self.num_features, x.len())));
        }
        Ok(self
            .forests
            .iter()
            .map(|trees| trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64)
            .collect())
    }

    pub fn predict_many<X: AsRef<[f64]> + Sync>(&self, x: &[X]) -> Result<Vec<Vec<f64>>> {
        x.par_iter().map(|r| self.predict(r.as_ref())).collect()
    }
}

/// Mean-decrease-of-impurity importances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// `per_target[t][j]`, each row summing to 1 (or all zero).
    pub per_target: Vec<Vec<f64>>,
    /// Mean of the per-target rows, renormalized.
    pub combined: Vec<f64>,
}

impl ImportanceReport {
    /// Feature indices by decreasing combined importance; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.combined.len()).collect();
        idx.sort_by(|&a, &b| self.combined[b].total_cmp(&self.combined[a]).then(a.cmp(&b)));
        idx
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

/// Per-feature sum of `(N_t / N) * Δi(t)` over splitting nodes, averaged
/// over trees and normalized to sum to one.
pub fn mdi_importance(model: &ForestModel) -> ImportanceReport {
    let p = model.num_features;
    let per_target: Vec<Vec<f64>> = model
        .forests
        .iter()
        .map(|trees| {
            let mut acc = vec![0.0; p];
            for t in trees {
                for (a, d) in acc.iter_mut().zip(t.impurity_decrease()) {
                    *a += d;
                }
            }
            normalized(acc.into_iter().map(|a| a / trees.len() as f64).collect())
        })
        .collect();
    let mut combined = vec![0.0; p];
    for row in &per_target {
        for (c, v) in combined.iter_mut().zip(row) {
            *c += v / per_target.len() as f64;
        }
    }
    ImportanceReport { per_target, combined: normalized(combined) }
}

/// Per-column root-mean-square error.
pub fn rmse<A: AsRef<[f64]>, B: AsRef<[f64]>>(pred: &[A], truth: &[B]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "prediction and truth must have equal nonzero row counts, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let cols = truth[0].as_ref().len();
    let mut sse = vec![0.0; cols];
    for (p, t) in pred.iter().zip(truth) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != cols || t.len() != cols {
            return Err(Error::Dimension("row widths differ".into()));
        }
        for ((s, a), b) in sse.iter_mut().zip(p).zip(t) {
            *s += (a - b).powi(2);
        }
    }
    Ok(sse.into_iter().map(|s| (s / pred.len() as f64).sqrt()).collect())
}

/// Serialized form of a tree: preorder arrays plus its importance sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeRecord {
    pub feature: Vec<i32>,
    pub value: Vec<f64>,
    pub impurity_decrease: Vec<f64>,
}

/// Serialized form of a [`ForestModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestRecord {
    pub params: ForestParams,
    pub num_features: usize,
    pub num_train: usize,
    pub forests: Vec<Vec<TreeRecord>>,
}

impl From<&ForestModel> for ForestRecord {
    fn from(m: &ForestModel) -> Self {
        let forests = m
            .forests
            .iter()
            .map(|trees| {
                trees
                    .iter()
                    .map(|t| {
                        let (feature, value) = t.to_preorder();
                        TreeRecord { feature, value, impurity_decrease: t.impurity_decrease().to_vec() }
                    })
                    .collect()
            })
            .collect();
        ForestRecord { params: m.params, num_features: m.num_features, num_train: m.num_train, forests }
    }
}

impl TryFrom<ForestRecord> for ForestModel {
    type Error = Error;

    fn try_from(r: ForestRecord) -> Result<Self> {
        let forests = r
            .forests
            .into_iter()
            .map(|trees| {
                if trees.is_empty() {
                    return Err(Error::Dimension("forest without trees".into()));
                }
                trees
                    .into_iter()
                    .map(|t| RegressionTree::from_preorder(&t.feature, &t.value, r.num_features, t.impurity_decrease))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForestModel { params: r.params, num_features: r.num_features, num_train: r.num_train, forests })
    }
}
