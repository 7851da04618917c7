//! Gradient-boosted trees for binary logistic loss.
//!
//! Trees are grown level by level with exact greedy splits over presorted
//! columns. Split gain and leaf weights use second-order statistics with
//! L1 (soft-threshold) and L2 leaf regularization:
//!
//! ```text
//! gain = 1/2 [T(G_L)^2/(H_L+l2) + T(G_R)^2/(H_R+l2) - T(G)^2/(H+l2)] - gamma
//! w    = -T(G) / (H + l2),   T(g) = sign(g) max(|g| - l1, 0)
//! ```

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub subsample: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub min_child_weight: f64,
    pub gamma: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self::sse()
    }
}

impl GbdtParams {
    fn table(learning_rate: f64, n_estimators: usize, max_depth: usize, subsample: f64) -> Self {
        Self {
            learning_rate,
            n_estimators,
            max_depth,
            subsample,
            reg_alpha: 0.01,
            reg_lambda: 0.01,
            min_child_weight: 0.1,
            gamma: 0.0,
        }
    }

    /// Stage 1 ensemble member.
    pub fn sse() -> Self {
        Self::table(0.1, 400, 5, 0.7)
    }

    pub fn drug() -> Self {
        Self::table(0.1, 300, 5, 0.6)
    }

    pub fn weapon() -> Self {
        Self::table(0.05, 300, 5, 0.6)
    }

    pub fn credential() -> Self {
        Self::table(0.1, 500, 7, 0.7)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flat tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub(crate) base_margin: f64,
    pub(crate) trees: Vec<Tree>,
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

fn logistic_loss(margin: f64, y: bool) -> f64 {
    // log(1 + exp(-s m)) with s = +-1, evaluated stably
    let z = if y { -margin } else { margin };
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Objective<'a> {
    params: &'a GbdtParams,
}

impl Objective<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let t = soft_threshold(g, self.params.reg_alpha);
        t * t / (h + self.params.reg_lambda)
    }

    fn leaf(&self, g: f64, h: f64) -> f64 {
        -soft_threshold(g, self.params.reg_alpha) / (h + self.params.reg_lambda)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    g_left: f64,
    h_left: f64,
}

const NO_NODE: usize = usize::MAX;
const NO_SLOT: u32 = u32::MAX;

/// Per-level scan state of one frontier node.
#[derive(Clone, Copy)]
struct ScanState {
    g_left: f64,
    h_left: f64,
    last: f64,
}

struct SplitSearch<'a> {
    params: &'a GbdtParams,
    obj: Objective<'a>,
    frontier: &'a [(usize, f64, f64)],
    parent: Vec<f64>,
    best: Vec<Option<Candidate>>,
    state: Vec<ScanState>,
}

impl SplitSearch<'_> {
    /// Offers the boundary below value `v` in slot `s`, then absorbs `(g, h)`.
    #[inline]
    fn step(&mut self, s: usize, feature: usize, v: f64, g: f64, h: f64) {
        let st = self.state[s];
        if v > st.last {
            let (_, g_tot, h_tot) = self.frontier[s];
            let (g_r, h_r) = (g_tot - st.g_left, h_tot - st.h_left);
            let mcw = self.params.min_child_weight;
            if st.h_left >= mcw && h_r >= mcw {
                let gain = 0.5
                    * (self.obj.score(st.g_left, st.h_left) + self.obj.score(g_r, h_r)
                        - self.parent[s])
                    - self.params.gamma;
                if gain > 0.0 && self.best[s].is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (st.last + v);
                    if threshold >= v {
                        threshold = st.last;
                    }
                    self.best[s] = Some(Candidate {
                        gain,
                        feature,
                        threshold,
                        g_left: st.g_left,
                        h_left: st.h_left,
                    });
                }
            }
        }
        let st = &mut self.state[s];
        st.g_left += g;
        st.h_left += h;
        st.last = v;
    }
}

/// Grows one tree on the rows whose `node_of` entry is 0 (the sampled rows).
///
/// Columns are scanned over their non-zero entries only; the zero block of
/// each node is recovered by subtraction from the node totals and offered as
/// a single step, which yields the same candidate splits as a dense scan.
fn grow_tree(
    x: &Matrix,
    order: &Presorted,
    grad: &[f64],
    hess: &[f64],
    node_of: &mut [usize],
    params: &GbdtParams,
) -> Tree {
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let (mut g_root, mut h_root) = (0.0, 0.0);
    for (r, &k) in node_of.iter().enumerate() {
        if k == 0 {
            g_root += grad[r];
            h_root += hess[r];
        }
    }
    // (node id, G, H) for the current level
    let mut frontier = vec![(0usize, g_root, h_root)];
    let mut slot = vec![NO_NODE; 1];
    let mut row_slot = vec![NO_SLOT; node_of.len()];
    let gh: Vec<[f64; 2]> = grad.iter().zip(hess).map(|(g, h)| [*g, *h]).collect();
    let obj = Objective { params };

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        slot.resize(nodes.len(), NO_NODE);
        slot.iter_mut().for_each(|s| *s = NO_NODE);
        for (s, &(id, _, h)) in frontier.iter().enumerate() {
            if h >= 2.0 * params.min_child_weight {
                slot[id] = s;
            }
        }
        let m = frontier.len();
        let mut count = vec![0usize; m];
        for (r, k) in node_of.iter().enumerate() {
            row_slot[r] = if *k < slot.len() && slot[*k] != NO_NODE {
                count[slot[*k]] += 1;
                slot[*k] as u32
            } else {
                NO_SLOT
            };
        }

        let mut search = SplitSearch {
            params,
            obj: Objective { params },
            frontier: &frontier,
            parent: frontier.iter().map(|&(_, g, h)| obj.score(g, h)).collect(),
            best: vec![None; m],
            state: Vec::new(),
        };
        let fresh = ScanState {
            g_left: 0.0,
            h_left: 0.0,
            last: f64::NAN,
        };
        let mut nz = vec![(0.0f64, 0.0f64, 0usize); m];

        for (f, col) in order.columns.iter().enumerate() {
            // non-zero totals per node, to size each zero block
            nz.iter_mut().for_each(|v| *v = (0.0, 0.0, 0));
            for &r in col.rows.iter() {
                let s = row_slot[r as usize];
                if s != NO_SLOT {
                    let [g, h] = gh[r as usize];
                    let e = &mut nz[s as usize];
                    e.0 += g;
                    e.1 += h;
                    e.2 += 1;
                }
            }
            search.state.clear();
            search.state.resize(m, fresh);
            let scan = |search: &mut SplitSearch, range: std::ops::Range<usize>| {
                for i in range {
                    let r = col.rows[i] as usize;
                    let s = row_slot[r];
                    if s != NO_SLOT {
                        let [g, h] = gh[r];
                        search.step(s as usize, f, col.values[i], g, h);
                    }
                }
            };
            scan(&mut search, 0..col.n_negative);
            for s in 0..m {
                if count[s] > nz[s].2 {
                    let (_, g_tot, h_tot) = frontier[s];
                    search.step(s, f, 0.0, g_tot - nz[s].0, h_tot - nz[s].1);
                }
            }
            scan(&mut search, col.n_negative..col.rows.len());
        }
        let best = search.best;

        let mut next = Vec::new();
        // children of split node id: (left id, right id, feature, threshold)
        let mut routing: Vec<Option<(usize, usize, usize, f64)>> = vec![None; nodes.len()];
        for (s, &(id, g, h)) in frontier.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    routing[id] = Some((left, right, c.feature, c.threshold));
                    next.push((left, c.g_left, c.h_left));
                    next.push((right, g - c.g_left, h - c.h_left));
                }
                None => {
                    nodes[id] = Node::Leaf {
                        value: params.learning_rate * obj.leaf(g, h),
                    };
                }
            }
        }
        for (r, k) in node_of.iter_mut().enumerate() {
            if *k == NO_NODE || *k >= routing.len() {
                continue;
            }
            if let Some((left, right, f, t)) = routing[*k] {
                *k = if x.get(r, f) <= t { left } else { right };
            }
        }
        frontier = next;
    }
    for (id, g, h) in frontier {
        nodes[id] = Node::Leaf {
            value: params.learning_rate * obj.leaf(g, h),
        };
    }
    Tree { nodes }
}

/// Non-zero entries of one feature, sorted by value (negatives first).
struct SortedColumn {
    rows: Vec<u32>,
    values: Vec<f64>,
    n_negative: usize,
}

struct Presorted {
    columns: Vec<SortedColumn>,
}

fn presort(x: &Matrix) -> Presorted {
    let columns = (0..x.cols())
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.rows() as u32)
                .filter(|&r| x.get(r as usize, f) != 0.0)
                .collect();
            idx.sort_by(|&a, &b| {
                x.get(a as usize, f)
                    .total_cmp(&x.get(b as usize, f))
                    .then(a.cmp(&b))
            });
            let values: Vec<f64> = idx.iter().map(|&r| x.get(r as usize, f)).collect();
            let n_negative = values.iter().take_while(|v| **v < 0.0).count();
            SortedColumn {
                rows: idx,
                values,
                n_negative,
            }
        })
        .collect();
    Presorted { columns }
}

impl GbdtModel {
    pub fn fit(x: &Matrix, y: &[bool], weights: &[f64], params: &GbdtParams, seed: u64) -> Self {
        let n = x.rows();
        let order = presort(x);
        let w_total: f64 = weights.iter().sum();
        let w_pos: f64 = y
            .iter()
            .zip(weights)
            .filter(|(l, _)| **l)
            .map(|(_, w)| w)
            .sum();
        let prior = (w_pos / w_total).clamp(1e-6, 1.0 - 1e-6);
        let base_margin = (prior / (1.0 - prior)).ln();

        let mut margin = vec![base_margin; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut node_of = vec![NO_NODE; n];
        let n_sample = ((params.subsample * n as f64).ceil() as usize).clamp(1, n);
        let mut rng = rng::seeded(seed);
        let mut trees = Vec::with_capacity(params.n_estimators);

        for _ in 0..params.n_estimators {
            for r in 0..n {
                let p = sigmoid(margin[r]);
                let t = if y[r] { 1.0 } else { 0.0 };
                grad[r] = weights[r] * (p - t);
                hess[r] = weights[r] * (p * (1.0 - p)).max(1e-16);
            }
            node_of.iter_mut().for_each(|k| *k = NO_NODE);
            if n_sample == n {
                node_of.iter_mut().for_each(|k| *k = 0);
            } else {
                for r in sample(&mut rng, n, n_sample) {
                    node_of[r] = 0;
                }
            }
            let tree = grow_tree(x, &order, &grad, &hess, &mut node_of, params);
            for (r, m) in margin.iter_mut().enumerate() {
                *m += tree.predict(x.row(r));
            }
            trees.push(tree);
        }
        GbdtModel { base_margin, trees }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_positive(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean logistic loss on `(x, y)` after 0, 1, ..., n_trees boosting rounds.
    pub fn loss_curve(&self, x: &Matrix, y: &[bool]) -> Vec<f64> {
        let mut margins = vec![self.base_margin; x.rows()];
        let mean_loss = |m: &[f64]| {
            m.iter()
                .zip(y)
                .map(|(m, y)| logistic_loss(*m, *y))
                .sum::<f64>()
                / m.len() as f64
        };
        let mut curve = vec![mean_loss(&margins)];
        for tree in &self.trees {
            for (r, m) in margins.iter_mut().enumerate() {
                *m += tree.predict(x.row(r));
            }
            curve.push(mean_loss(&margins));
        }
        curve
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Matrix, Vec<bool>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            rows.push(vec![t, (t * 7.0).sin()]);
            y.push(t > 0.5);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero() {
        assert_eq!(soft_threshold(0.5, 0.1), 0.4);
        assert_eq!(soft_threshold(-0.5, 0.1), -0.4);
        assert_eq!(soft_threshold(0.05, 0.1), 0.0);
    }

    #[test]
    fn stump_splits_at_midpoint() {
        let (x, y) = blobs();
        let params = GbdtParams {
            n_estimators: 1,
            max_depth: 1,
            subsample: 1.0,
            ..GbdtParams::sse()
        };
        let m = GbdtModel::fit(&x, &y, &vec![1.0; y.len()], &params, 0);
        match &m.trees[0].nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert!((*threshold - 0.5125).abs() < 1e-12, "{threshold}");
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn loss_non_increasing_full_batch() {
        let (x, y) = blobs();
        let params = GbdtParams {
            subsample: 1.0,
            n_estimators: 60,
            ..GbdtParams::sse()
        };
        let m = GbdtModel::fit(&x, &y, &vec![1.0; y.len()], &params, 3);
        let curve = m.loss_curve(&x, &y);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{curve:?}");
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((logistic_loss(0.0, true) - 2f64.ln()).abs() < 1e-15);
    }
}
