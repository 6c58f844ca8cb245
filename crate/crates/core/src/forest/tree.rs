//! Greedy variance-reduction regression trees.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_for;
use crate::{Error, Result};

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Features examined at each split; values at or above the feature
    /// count examine every feature.
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_features: usize::MAX, min_samples_leaf: 1, max_depth: None }
    }
}

/// Node of a tree laid out in preorder: an internal node's left child is
/// the next node and `right` indexes its right child.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, right: usize },
}

/// Fitted tree with the per-feature sum of `(N_t / N) * Δi(t)` over its
/// splits, where `N` counts the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
    num_features: usize,
    impurity_decrease: Vec<f64>,
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// `N_t * Δi(t)`: parent sum of squares minus both children's.
    pub sse_decrease: f64,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Unnormalized MDI contribution per feature.
    pub fn impurity_decrease(&self) -> &[f64] {
        &self.impurity_decrease
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, right } => {
                    i = if x[feature] <= threshold { i + 1 } else { right };
                }
            }
        }
    }

    /// Rebuilds a tree from preorder `(feature, value)` pairs, where a
    /// negative feature marks a leaf whose value is its prediction.
    pub fn from_preorder(
        features: &[i32],
        values: &[f64],
        num_features: usize,
        impurity_decrease: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: &str| Error::Dimension(format!("malformed tree: {msg}"));
        if features.len() != values.len() || features.is_empty() {
            return Err(bad("feature and value arrays differ in length or are empty"));
        }
        if impurity_decrease.len() != num_features {
            return Err(bad("importance length differs from feature count"));
        }
        let mut nodes = Vec::with_capacity(features.len());
        // Internal nodes still waiting for their right child.
        let mut pending: Vec<usize> = Vec::new();
        let mut complete = false;
        for (i, (&f, &v)) in features.iter().zip(values).enumerate() {
            if complete {
                return Err(bad("trailing nodes after a complete tree"));
            }
            if i > 0 && matches!(nodes[i - 1], TreeNode::Leaf { .. }) {
                match pending.pop() {
                    Some(parent) => {
                        if let TreeNode::Split { right, .. } = &mut nodes[parent] {
                            *right = i;
                        }
                    }
                    None => return Err(bad("leaf without parent")),
                }
            }
            if f < 0 {
                nodes.push(TreeNode::Leaf { value: v });
                complete = pending.is_empty();
            } else {
                let feature = f as usize;
                if feature >= num_features {
                    return Err(bad("feature index out of range"));
                }
                nodes.push(TreeNode::Split { feature, threshold: v, right: 0 });
                pending.push(i);
            }
        }
        if !complete {
            return Err(bad("truncated tree"));
        }
        Ok(Self { nodes, num_features, impurity_decrease })
    }

    /// Preorder `(feature, value)` arrays; leaves carry feature `-1`.
    pub fn to_preorder(&self) -> (Vec<i32>, Vec<f64>) {
        self.nodes
            .iter()
            .map(|n| match *n {
                TreeNode::Leaf { value } => (-1, value),
                TreeNode::Split { feature, threshold, .. } => (feature as i32, threshold),
            })
            .unzip()
    }
}

/// Mean of `y` over `idx` and the sum of squared deviations from it.
fn node_stats(y: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let sse = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, sse)
}

/// Gains closer than this fraction of the node's sum of squares count as
/// ties, which then go to the earliest candidate.
const TIE_TOLERANCE: f64 = 1e-12;

/// Best split of the rows `idx` over `features` (ascending), scanning
/// midpoints between consecutive distinct values. Ties in gain keep the
/// lowest feature, then the lowest threshold.
pub fn best_split<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    idx: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    let leaf = min_samples_leaf.max(1);
    if n < 2 * leaf {
        return None;
    }
    let (mean, sse) = node_stats(y, idx);
    let tol = TIE_TOLERANCE * sse;
    let mut best: Option<SplitChoice> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x[i].as_ref()[f], y[i] - mean)));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += pairs[k].1;
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < leaf {
                continue;
            }
            if n_right < leaf {
                break;
            }
            let (a, b) = (pairs[k].0, pairs[k + 1].0);
            if a >= b {
                continue;
            }
            // Parent SSE minus children SSE for centered targets.
            let right_sum = total - left_sum;
            let gain =
                left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - total * total / n as f64;
            if best.is_none_or(|s| gain > s.sse_decrease + tol) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(SplitChoice { feature: f, threshold, sse_decrease: gain });
            }
        }
    }
    best.filter(|s| s.sse_decrease > tol && s.sse_decrease > 0.0)
}

struct Builder<'a, X> {
    x: &'a [X],
    y: &'a [f64],
    params: TreeParams,
    num_features: usize,
    total_rows: f64,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    impurity_decrease: Vec<f64>,
}

impl<X: AsRef<[f64]>> Builder<'_, X> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.num_features;
        if self.params.max_features >= p {
            return (0..p).collect();
        }
        let mut f = sample(&mut self.rng, p, self.params.max_features.max(1)).into_vec();
        f.sort_unstable();
        f
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) {
        let id = self.nodes.len();
        let first = self.y[idx[0]];
        let constant = idx.iter().all(|&i| self.y[i] == first);
        // A pure node keeps its exact target rather than a rounded mean.
        let value = if constant { first } else { node_stats(self.y, idx).0 };
        self.nodes.push(TreeNode::Leaf { value });

        if constant || self.params.max_depth.is_some_and(|d| depth >= d) {
            return;
        }
        let features = self.candidate_features();
        let Some(split) = best_split(self.x, self.y, idx, &features, self.params.min_samples_leaf) else {
            return;
        };
        let f = split.feature;
        let x = self.x;
        idx.sort_by_key(|&i| x[i].as_ref()[f] > split.threshold);
        let n_left = idx.iter().take_while(|&&i| x[i].as_ref()[f] <= split.threshold).count();
        self.impurity_decrease[f] += split.sse_decrease / self.total_rows;

        let (left, right) = idx.split_at_mut(n_left);
        self.nodes[id] = TreeNode::Split { feature: f, threshold: split.threshold, right: 0 };
        self.grow(left, depth + 1);
        let right_id = self.nodes.len();
        self.grow(right, depth + 1);
        self.nodes[id] = TreeNode::Split { feature: f, threshold: split.threshold, right: right_id };
    }
}

fn check_shapes<X: AsRef<[f64]>>(x: &[X], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Parameter("cannot fit a tree on zero rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    let p = x[0].as_ref().len();
    if p == 0 || x.iter().any(|r| r.as_ref().len() != p) {
        return Err(Error::Dimension("feature rows must share a nonzero length".into()));
    }
    Ok(p)
}

/// Fits a tree on every row of `x`.
pub fn fit_tree<X: AsRef<[f64]>>(x: &[X], y: &[f64], params: &TreeParams, seed: u64) -> Result<RegressionTree> {
    let idx: Vec<usize> = (0..x.len()).collect();
    fit_tree_on(x, y, idx, params, seed)
}

/// Fits a tree on the rows listed in `rows`, which may repeat.
pub fn fit_tree_on<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    mut rows: Vec<usize>,
    params: &TreeParams,
    seed: u64,
) -> Result<RegressionTree> {
    let p = check_shapes(x, y)?;
    if rows.is_empty() {
        return Err(Error::Parameter("cannot fit a tree on zero rows".into()));
    }
    let mut b = Builder {
        x,
        y,
        params: *params,
        num_features: p,
        total_rows: rows.len() as f64,
        rng: rng_for(seed, 0),
        nodes: Vec::new(),
        impurity_decrease: vec![0.0; p],
    };
    b.grow(&mut rows, 0);
    Ok(RegressionTree { nodes: b.nodes, num_features: p, impurity_decrease: b.impurity_decrease })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_is_single_leaf() {
        let x = vec![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let tree = fit_tree(&x, &[0.1, 0.1, 0.1], &TreeParams::default(), 0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.predict(&[9.0, 9.0]), 0.1);
    }

    #[test]
    fn two_point_split() {
        let x = vec![[0.0], [1.0]];
        let tree = fit_tree(&x, &[0.0, 10.0], &TreeParams::default(), 0).unwrap();
        assert_eq!(
            tree.nodes(),
            &[
                TreeNode::Split { feature: 0, threshold: 0.5, right: 2 },
                TreeNode::Leaf { value: 0.0 },
                TreeNode::Leaf { value: 10.0 },
            ]
        );
        // Root variance 25, children pure: Δi = 25 with p(t) = 1.
        assert_eq!(tree.impurity_decrease(), &[25.0]);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let params = TreeParams { min_samples_leaf: 3, ..TreeParams::default() };
        let tree = fit_tree(&x, &y, &params, 0).unwrap();
        let mut counts = std::collections::HashMap::new();
        for r in &x {
            let leaf = tree.predict(r).to_bits();
            *counts.entry(leaf).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 3), "{counts:?}");
    }

    #[test]
    fn depth_limit() {
        let x: Vec<[f64; 1]> = (0..16).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let params = TreeParams { max_depth: Some(1), ..TreeParams::default() };
        assert_eq!(fit_tree(&x, &y, &params, 0).unwrap().nodes().len(), 3);
    }

    #[test]
    fn memorizes_distinct_training_points() {
        let x: Vec<[f64; 2]> = (0..30).map(|i| [(i * 7 % 30) as f64, (i * 11 % 13) as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| ((i * 37) % 17) as f64 - 3.0).collect();
        let tree = fit_tree(&x, &y, &TreeParams::default(), 5).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert_eq!(tree.predict(r), *t);
        }
    }

    #[test]
    fn preorder_round_trip() {
        let x: Vec<[f64; 3]> = (0..40).map(|i| [i as f64, (i % 7) as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 13) % 11) as f64).collect();
        let tree = fit_tree(&x, &y, &TreeParams { max_features: 2, ..TreeParams::default() }, 9).unwrap();
        let (f, v) = tree.to_preorder();
        let back = RegressionTree::from_preorder(&f, &v, 3, tree.impurity_decrease().to_vec()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn malformed_preorder_rejected() {
        let imp = vec![0.0];
        assert!(RegressionTree::from_preorder(&[0, -1], &[0.5, 1.0], 1, imp.clone()).is_err());
        assert!(RegressionTree::from_preorder(&[-1, -1], &[0.5, 1.0], 1, imp.clone()).is_err());
        assert!(RegressionTree::from_preorder(&[3, -1, -1], &[0.5, 1.0, 2.0], 1, imp.clone()).is_err());
        assert!(RegressionTree::from_preorder(&[], &[], 1, imp).is_err());
    }

    #[test]
    fn shape_errors() {
        let x: Vec<[f64; 1]> = vec![];
        assert!(matches!(fit_tree(&x, &[], &TreeParams::default(), 0), Err(Error::Parameter(_))));
        assert!(matches!(fit_tree(&[[1.0]], &[1.0, 2.0], &TreeParams::default(), 0), Err(Error::Dimension(_))));
    }
}
