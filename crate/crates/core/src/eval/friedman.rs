use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gamma::chi_square_sf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub n_runs: usize,
    pub n_models: usize,
}

/// Ranks within one run: 1 for the highest score, tied scores share the
/// average of the positions they occupy.
fn rank_run(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test over a runs x models score matrix (higher is better).
///
/// The statistic is `12 / (N k (k + 1)) * sum_j (R_j - N (k + 1) / 2)^2`
/// with `R_j` the rank sum of model `j`, without tie correction, and the
/// p-value is its chi-square upper tail with `k - 1` degrees of freedom.
pub fn friedman_rank(scores: &[Vec<f64>]) -> Result<RankReport> {
    let n = scores.len();
    let k = scores.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::Shape(format!(
            "friedman test needs at least 2 runs and 2 models, got {n} x {k}"
        )));
    }
    if let Some(i) = scores.iter().position(|r| r.len() != k) {
        return Err(Error::Shape(format!(
            "run {i} has {} scores, expected {k}",
            scores[i].len()
        )));
    }
    if scores.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    let mut sums = vec![0.0; k];
    for run in scores {
        for (s, r) in sums.iter_mut().zip(rank_run(run)) {
            *s += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let center = nf * (kf + 1.0) / 2.0;
    let spread: f64 = sums.iter().map(|r| (r - center) * (r - center)).sum();
    let statistic = 12.0 / (nf * kf * (kf + 1.0)) * spread;
    Ok(RankReport {
        mean_ranks: sums.iter().map(|s| s / nf).collect(),
        statistic,
        p_value: chi_square_sf(statistic, kf - 1.0),
        n_runs: n,
        n_models: k,
    })
}

/// One line of a long-format score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub run: String,
    pub model: String,
    pub accuracy: f64,
    pub f1: f64,
    pub tmcc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub models: Vec<String>,
    pub accuracy: RankReport,
    pub f1: RankReport,
    pub tmcc: RankReport,
    /// Per model, the mean of its three mean ranks.
    pub overall_rank: Vec<f64>,
}

/// One Friedman test per metric over a complete runs x models table.
/// Models are reported in lexicographic order.
pub fn rank_score_table(rows: &[ScoreRow]) -> Result<MetricRanking> {
    let mut table: BTreeMap<&str, BTreeMap<&str, &ScoreRow>> = BTreeMap::new();
    for r in rows {
        if table
            .entry(&r.run)
            .or_default()
            .insert(&r.model, r)
            .is_some()
        {
            return Err(Error::Format(format!(
                "duplicate score for run `{}`, model `{}`",
                r.run, r.model
            )));
        }
    }
    let models: Vec<String> = {
        let mut m: Vec<String> = rows.iter().map(|r| r.model.clone()).collect();
        m.sort();
        m.dedup();
        m
    };
    for (run, cells) in &table {
        if cells.len() != models.len() {
            return Err(Error::Shape(format!(
                "run `{run}` scores {} of {} models",
                cells.len(),
                models.len()
            )));
        }
    }
    let matrix = |f: fn(&ScoreRow) -> f64| -> Vec<Vec<f64>> {
        table
            .values()
            .map(|cells| models.iter().map(|m| f(cells[m.as_str()])).collect())
            .collect()
    };
    let accuracy = friedman_rank(&matrix(|r| r.accuracy))?;
    let f1 = friedman_rank(&matrix(|r| r.f1))?;
    let tmcc = friedman_rank(&matrix(|r| r.tmcc))?;
    let overall_rank = (0..models.len())
        .map(|j| (accuracy.mean_ranks[j] + f1.mean_ranks[j] + tmcc.mean_ranks[j]) / 3.0)
        .collect();
    Ok(MetricRanking {
        models,
        accuracy,
        f1,
        tmcc,
        overall_rank,
    })
}
