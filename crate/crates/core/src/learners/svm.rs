//! RBF-kernel C-SVC trained by sequential minimal optimization.
//!
//! The solver follows the maximal-violating-pair scheme with second-order
//! working-set selection (Fan, Chen and Lin 2005), without shrinking.
//! Class probabilities come from a Platt sigmoid fitted on out-of-fold
//! decision values.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::platt::PlattScaling;
use super::Matrix;
use crate::features::MANUAL_FEATURE_COUNT;
use crate::rng;

const TAU: f64 = 1e-12;
/// Kernel matrices up to this many entries are cached in full.
const FULL_KERNEL_LIMIT: usize = 36_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    /// Iteration cap, in units of one working-set update per training row.
    pub max_passes: usize,
    pub calibration_folds: usize,
    /// Number of trailing columns z-scored before the kernel sees them.
    pub scaled_tail: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self::sse()
    }
}

impl SvmParams {
    pub fn sse() -> Self {
        Self {
            kernel: Kernel::Rbf,
            c: 0.01,
            gamma: 0.1,
            tolerance: 1e-3,
            max_passes: 10_000,
            calibration_folds: 3,
            scaled_tail: MANUAL_FEATURE_COUNT,
        }
    }
}

/// Per-column z-scoring of a trailing block, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    start: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix, tail: usize) -> Self {
        let start = x.cols().saturating_sub(tail);
        let width = x.cols() - start;
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; width];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(&row[start..]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(&row[start..]).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { start, mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        let mut out = row.to_vec();
        for (j, v) in out[self.start..].iter_mut().enumerate() {
            *v = (*v - self.mean[j]) / self.scale[j];
        }
        out
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.apply(r)).collect();
        Matrix::from_rows(&rows).expect("rows share a width")
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rbf(gamma: f64, a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    (-gamma * (na + nb - 2.0 * dot(a, b)).max(0.0)).exp()
}

enum KernelRows<'a> {
    Full(Vec<f64>),
    OnDemand {
        x: &'a Matrix,
        norms: Vec<f64>,
        cache: HashMap<usize, Vec<f64>>,
    },
}

struct KernelMatrix<'a> {
    n: usize,
    gamma: f64,
    rows: KernelRows<'a>,
}

impl<'a> KernelMatrix<'a> {
    fn new(x: &'a Matrix, gamma: f64) -> Self {
        let n = x.rows();
        let norms: Vec<f64> = x.iter_rows().map(sq_norm).collect();
        let rows = if n * n <= FULL_KERNEL_LIMIT {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in 0..i {
                    let v = rbf(gamma, x.row(i), norms[i], x.row(j), norms[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            KernelRows::Full(k)
        } else {
            KernelRows::OnDemand {
                x,
                norms,
                cache: HashMap::new(),
            }
        };
        KernelMatrix { n, gamma, rows }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.n;
        let gamma = self.gamma;
        match &mut self.rows {
            KernelRows::Full(k) => &k[i * n..(i + 1) * n],
            KernelRows::OnDemand { x, norms, cache } => {
                if !cache.contains_key(&i) && cache.len() * n >= FULL_KERNEL_LIMIT {
                    cache.clear();
                }
                cache.entry(i).or_insert_with(|| {
                    (0..n)
                        .map(|j| rbf(gamma, x.row(i), norms[i], x.row(j), norms[j]))
                        .collect()
                })
            }
        }
    }
}

struct DualSolution {
    alpha: Vec<f64>,
    rho: f64,
}

/// Solves the C-SVC dual with per-sample box bounds `c[i]`.
fn solve_dual(x: &Matrix, y: &[f64], c: &[f64], params: &SvmParams) -> DualSolution {
    let n = x.rows();
    let mut kernel = KernelMatrix::new(x, params.gamma);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_passes.saturating_mul(n.max(1));

    let upper = |a: f64, c: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    for _ in 0..max_iter {
        // i: maximal violator among the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = if y[t] > 0.0 {
                if upper(alpha[t], c[t]) {
                    continue;
                }
                -grad[t]
            } else {
                if lower(alpha[t]) {
                    continue;
                }
                grad[t]
            };
            if v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            break;
        }
        let i = i_sel;
        let k_i = kernel.row(i).to_vec();

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let (grad_diff, violation) = if y[t] > 0.0 {
                if lower(alpha[t]) {
                    continue;
                }
                (gmax + grad[t], grad[t])
            } else {
                if upper(alpha[t], c[t]) {
                    continue;
                }
                (gmax - grad[t], -grad[t])
            };
            if violation >= gmax2 {
                gmax2 = violation;
            }
            if grad_diff > 0.0 {
                // Q_ii + Q_tt - 2 y_i y_t Q_it = K_ii + K_tt - 2 K_it
                let quad = 2.0 - 2.0 * k_i[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < params.tolerance || j_sel == usize::MAX {
            break;
        }
        let j = j_sel;
        let k_j = kernel.row(j).to_vec();
        let (c_i, c_j) = (c[i], c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k_i[j];

        if y[i] != y[j] {
            let mut quad = 2.0 + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > c_i - c_j {
                if alpha[i] > c_i {
                    alpha[i] = c_i;
                    alpha[j] = c_i - diff;
                }
            } else if alpha[j] > c_j {
                alpha[j] = c_j;
                alpha[i] = c_j + diff;
            }
        } else {
            let mut quad = 2.0 - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c_i {
                if alpha[i] > c_i {
                    alpha[i] = c_i;
                    alpha[j] = sum - c_i;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c_j {
                if alpha[j] > c_j {
                    alpha[j] = c_j;
                    alpha[i] = sum - c_j;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * d_i + y[j] * k_j[t] * d_j);
        }
    }

    // rho from free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t], c[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution { alpha, rho }
}

/// Kernel expansion `f(x) = sum_i coef_i K(s_i, x) - rho` over scaled inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DecisionFunction {
    gamma: f64,
    support: Matrix,
    norms: Vec<f64>,
    coef: Vec<f64>,
    rho: f64,
}

impl DecisionFunction {
    fn train(x: &Matrix, labels: &[bool], weights: &[f64], params: &SvmParams) -> Self {
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = weights.iter().map(|w| params.c * w).collect();
        let sol = solve_dual(x, &y, &c, params);
        let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > 0.0).collect();
        let support = x.select(&sv);
        DecisionFunction {
            gamma: params.gamma,
            norms: support.iter_rows().map(sq_norm).collect(),
            coef: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            support,
            rho: sol.rho,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let nx = sq_norm(x);
        let mut s = 0.0;
        for (k, (coef, ns)) in self.coef.iter().zip(&self.norms).enumerate() {
            s += coef * rbf(self.gamma, self.support.row(k), *ns, x, nx);
        }
        s - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    scaler: Standardizer,
    decision: DecisionFunction,
    platt: PlattScaling,
}

/// Stratified fold assignment; `None` when some class has fewer than two rows,
/// in which case a held-out fold could leave its training part single-class.
fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Option<Vec<usize>> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if k < 2 || pos.len() < 2 || neg.len() < 2 {
        return None;
    }
    let mut rng = rng::seeded(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (i, &r) in pos.iter().chain(&neg).enumerate() {
        fold[r] = i % k;
    }
    Some(fold)
}

impl SvmModel {
    pub fn fit(
        x: &Matrix,
        labels: &[bool],
        weights: &[f64],
        params: &SvmParams,
        seed: u64,
    ) -> Self {
        let scaler = Standardizer::fit(x, params.scaled_tail);
        let xs = scaler.transform(x);

        let mut oof = vec![0.0; x.rows()];
        match stratified_folds(labels, params.calibration_folds, seed) {
            Some(fold) => {
                for k in 0..params.calibration_folds {
                    let train: Vec<usize> = (0..x.rows()).filter(|&i| fold[i] != k).collect();
                    let held: Vec<usize> = (0..x.rows()).filter(|&i| fold[i] == k).collect();
                    let sub_labels: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
                    let sub_weights: Vec<f64> = train.iter().map(|&i| weights[i]).collect();
                    let f = DecisionFunction::train(
                        &xs.select(&train),
                        &sub_labels,
                        &sub_weights,
                        params,
                    );
                    for &i in &held {
                        oof[i] = f.value(xs.row(i));
                    }
                }
                let decision = DecisionFunction::train(&xs, labels, weights, params);
                let platt = PlattScaling::fit(&oof, labels);
                SvmModel {
                    scaler,
                    decision,
                    platt,
                }
            }
            None => {
                let decision = DecisionFunction::train(&xs, labels, weights, params);
                for (i, v) in oof.iter_mut().enumerate() {
                    *v = decision.value(xs.row(i));
                }
                let platt = PlattScaling::fit(&oof, labels);
                SvmModel {
                    scaler,
                    decision,
                    platt,
                }
            }
        }
    }

    pub fn decision_value(&self, x: &[f64]) -> f64 {
        self.decision.value(&self.scaler.apply(x))
    }

    pub fn predict_positive(&self, x: &[f64]) -> f64 {
        self.platt.probability(self.decision_value(x))
    }

    pub fn n_support(&self) -> usize {
        self.decision.coef.len()
    }
}
