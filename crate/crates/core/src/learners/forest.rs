//! Random forest of Gini-split classification trees.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gbdt::{Node, Tree};
use super::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`; this is what the classifier meaning of "auto" selects.
    Auto,
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Auto | MaxFeatures::Sqrt => {
                ((n_features as f64).sqrt().floor() as usize).clamp(1, n_features.max(1))
            }
            MaxFeatures::All => n_features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self::sse()
    }
}

impl ForestParams {
    pub fn sse() -> Self {
        Self {
            n_estimators: 400,
            max_depth: 5,
            max_features: MaxFeatures::Auto,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

/// Weighted Gini impurity times total weight: w - (w_pos^2 + w_neg^2) / w.
fn weighted_gini(w_pos: f64, w_neg: f64) -> f64 {
    let w = w_pos + w_neg;
    if w <= 0.0 {
        0.0
    } else {
        w - (w_pos * w_pos + w_neg * w_neg) / w
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    w: &'a [f64],
    max_depth: usize,
    mtry: usize,
    min_samples_split: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, w_pos: f64, w_neg: f64) -> usize {
        let total = w_pos + w_neg;
        let value = if total > 0.0 { w_pos / total } else { 0.5 };
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut rng::Rng) -> usize {
        let (mut w_pos, mut w_neg) = (0.0, 0.0);
        for &r in rows.iter() {
            if self.y[r] {
                w_pos += self.w[r];
            } else {
                w_neg += self.w[r];
            }
        }
        if depth >= self.max_depth
            || rows.len() < self.min_samples_split
            || w_pos == 0.0
            || w_neg == 0.0
        {
            return self.leaf(w_pos, w_neg);
        }

        let parent = weighted_gini(w_pos, w_neg);
        let mut features: Vec<usize> = (0..self.x.cols()).collect();
        features.shuffle(rng);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for (tried, &f) in features.iter().enumerate() {
            // keep looking past mtry features until some valid split exists
            if tried >= self.mtry && best.is_some() {
                break;
            }
            keyed.clear();
            keyed.extend(rows.iter().map(|&r| (self.x.get(r, f), r)));
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut lp, mut ln) = (0.0, 0.0);
            for i in 0..keyed.len() - 1 {
                let (v, r) = keyed[i];
                if self.y[r] {
                    lp += self.w[r];
                } else {
                    ln += self.w[r];
                }
                let next = keyed[i + 1].0;
                if next <= v {
                    continue;
                }
                let impurity = weighted_gini(lp, ln) + weighted_gini(w_pos - lp, w_neg - ln);
                let decrease = parent - impurity;
                if decrease > 1e-12 && best.is_none_or(|b| decrease > b.0) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((decrease, f, threshold));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(w_pos, w_neg);
        };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let mut split = 0;
        for i in 0..rows.len() {
            if self.x.get(rows[i], feature) <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(split);
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// A single Gini classification tree whose leaves hold the positive-class fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub(crate) tree: Tree,
}

impl DecisionTree {
    /// Fits on rows with positive `weights`; a zero weight excludes a row.
    pub fn fit(
        x: &Matrix,
        y: &[bool],
        weights: &[f64],
        max_depth: usize,
        max_features: MaxFeatures,
        min_samples_split: usize,
        seed: u64,
    ) -> Self {
        let mut rows: Vec<usize> = (0..x.rows()).filter(|&r| weights[r] > 0.0).collect();
        let mut builder = Builder {
            x,
            y,
            w: weights,
            max_depth,
            mtry: max_features.count(x.cols()),
            min_samples_split,
            nodes: Vec::new(),
        };
        let mut rng = rng::seeded(seed);
        builder.build(&mut rows, 0, &mut rng);
        // `build` pushes the root first
        DecisionTree {
            tree: Tree {
                nodes: builder.nodes,
            },
        }
    }

    pub fn predict_positive(&self, x: &[f64]) -> f64 {
        self.tree.predict(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub(crate) trees: Vec<DecisionTree>,
}

/// Seed of the `i`-th tree of a forest fitted with `seed`.
pub fn tree_seed(seed: u64, i: usize) -> u64 {
    rng::derive(seed, 2 * i as u64)
}

fn bootstrap_seed(seed: u64, i: usize) -> u64 {
    rng::derive(seed, 2 * i as u64 + 1)
}

impl ForestModel {
    pub fn fit(x: &Matrix, y: &[bool], weights: &[f64], params: &ForestParams, seed: u64) -> Self {
        let n = x.rows();
        let trees = (0..params.n_estimators)
            .map(|i| {
                let w: Vec<f64> = if params.bootstrap {
                    let mut counts = vec![0u32; n];
                    let mut rng = rng::seeded(bootstrap_seed(seed, i));
                    for _ in 0..n {
                        counts[rng.gen_range(0..n)] += 1;
                    }
                    counts
                        .iter()
                        .zip(weights)
                        .map(|(c, w)| *c as f64 * w)
                        .collect()
                } else {
                    weights.to_vec()
                };
                DecisionTree::fit(
                    x,
                    y,
                    &w,
                    params.max_depth,
                    params.max_features,
                    params.min_samples_split,
                    tree_seed(seed, i),
                )
            })
            .collect();
        ForestModel { trees }
    }

    pub fn predict_positive(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| t.predict_positive(x))
            .sum::<f64>()
            / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_is_sqrt() {
        assert_eq!(MaxFeatures::Auto.count(95), 9);
        assert_eq!(MaxFeatures::Sqrt.count(1), 1);
        assert_eq!(MaxFeatures::All.count(7), 7);
    }

    #[test]
    fn gini_of_pure_node_is_zero() {
        assert_eq!(weighted_gini(3.0, 0.0), 0.0);
        assert_eq!(weighted_gini(2.0, 2.0), 2.0);
    }

    #[test]
    fn tree_separates_threshold_data() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 12).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = DecisionTree::fit(&x, &y, &[1.0; 20], 5, MaxFeatures::All, 2, 0);
        for (r, &label) in y.iter().enumerate() {
            assert_eq!(t.predict_positive(x.row(r)) > 0.5, label);
        }
        assert_eq!(t.tree.nodes.len(), 3);
    }

    #[test]
    fn single_tree_forest_without_bootstrap_is_that_tree() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i * 7 % 11) as f64, (i * 5 % 13) as f64, i as f64 * 0.1])
            .collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 7 % 11) > 4).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let w = vec![1.0; 30];
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_features: MaxFeatures::Sqrt,
            ..ForestParams::sse()
        };
        let forest = ForestModel::fit(&x, &y, &w, &params, 42);
        let tree = DecisionTree::fit(&x, &y, &w, 5, MaxFeatures::Sqrt, 2, tree_seed(42, 0));
        for r in 0..30 {
            assert_eq!(
                forest.predict_positive(x.row(r)),
                tree.predict_positive(x.row(r))
            );
        }
    }
}
