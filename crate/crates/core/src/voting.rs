//! Entropy-weighted voting across base learners.
//!
//! Each learner is scored on a validation set by the mean entropy of its
//! correct predictions (MEC, lower is better) and of its wrong predictions
//! (MEW, higher is better). Its vote weight is proportional to MEW / MEC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::ProbabilityRow;

/// Floor for entropy means, and the stand-in value for an empty set.
pub const EPSILON: f64 = 1e-6;

const SUM_TOLERANCE: f64 = 1e-9;

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("probability {bad} outside [0, 1]")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Domain(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(p.iter()
        .filter(|v| **v > 0.0)
        .map(|v| -v * v.log2())
        .sum::<f64>()
        .max(0.0))
}

fn row_entropy(row: &ProbabilityRow) -> Result<f64> {
    shannon_entropy(&[row.p_negative, row.p_positive])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyStats {
    pub mec: f64,
    pub mew: f64,
    pub n_correct: usize,
    pub n_wrong: usize,
}

/// Mean entropies over correct and wrong validation predictions.
///
/// An empty side gets [`EPSILON`] as its mean.
pub fn entropy_stats(
    rows: &[ProbabilityRow],
    y_true: &[bool],
    y_pred: &[bool],
) -> Result<EntropyStats> {
    if rows.len() != y_true.len() || rows.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} probability rows, {} true labels, {} predictions",
            rows.len(),
            y_true.len(),
            y_pred.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Shape(
            "entropy statistics need at least one row".into(),
        ));
    }
    let (mut sum_c, mut sum_w) = (0.0, 0.0);
    let (mut n_c, mut n_w) = (0usize, 0usize);
    for ((row, t), p) in rows.iter().zip(y_true).zip(y_pred) {
        let h = row_entropy(row)?;
        if t == p {
            sum_c += h;
            n_c += 1;
        } else {
            sum_w += h;
            n_w += 1;
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { EPSILON } else { s / n as f64 };
    Ok(EntropyStats {
        mec: mean(sum_c, n_c),
        mew: mean(sum_w, n_w),
        n_correct: n_c,
        n_wrong: n_w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub w: Vec<f64>,
}

impl EnsembleWeights {
    pub fn uniform(n: usize) -> Self {
        Self {
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Normalizes non-negative ratios. A zero or non-finite total falls back
    /// to uniform weights.
    pub fn from_ratios(ratios: &[f64]) -> Self {
        let total: f64 = ratios.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Self::uniform(ratios.len());
        }
        Self {
            w: ratios.iter().map(|r| r / total).collect(),
        }
    }
}

/// The MEW / MEC ratio of one learner, with MEC floored at [`EPSILON`].
pub fn entropy_ratio(stats: &EntropyStats) -> f64 {
    stats.mew.max(0.0) / stats.mec.max(EPSILON)
}

pub fn ensemble_weights(stats: &[EntropyStats]) -> EnsembleWeights {
    let ratios: Vec<f64> = stats.iter().map(entropy_ratio).collect();
    EnsembleWeights::from_ratios(&ratios)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub tpp_sale: f64,
    pub tpp_no_sale: f64,
    /// `true` for sale. Ties go to no sale.
    pub pseudo_label: bool,
    /// Unweighted mean of the learners' probabilities for the chosen label.
    pub confidence: f64,
}

pub fn weighted_vote(rows: &[ProbabilityRow], weights: &EnsembleWeights) -> Result<VoteResult> {
    if rows.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} learner rows but {} weights",
            rows.len(),
            weights.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Shape("vote needs at least one learner".into()));
    }
    let mut tpp_sale = 0.0;
    let mut tpp_no_sale = 0.0;
    for (row, w) in rows.iter().zip(&weights.w) {
        tpp_sale += w * row.p_positive;
        tpp_no_sale += w * row.p_negative;
    }
    let pseudo_label = tpp_sale > tpp_no_sale;
    let confidence = rows.iter().map(|r| r.get(pseudo_label)).sum::<f64>() / rows.len() as f64;
    Ok(VoteResult {
        tpp_sale,
        tpp_no_sale,
        pseudo_label,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(p: f64) -> ProbabilityRow {
        ProbabilityRow::from_positive(p)
    }

    #[test]
    fn entropy_fixtures() {
        assert_eq!(shannon_entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        // -0.9 log2 0.9 - 0.1 log2 0.1 = 0.4689955935892812
        let h = shannon_entropy(&[0.9, 0.1]).unwrap();
        assert!((h - 0.468996).abs() < 1e-6);
        assert!((h - 0.4689955935892812).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_bad_distributions() {
        assert!(matches!(
            shannon_entropy(&[0.5, 0.6]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            shannon_entropy(&[-0.1, 1.1]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(shannon_entropy(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn stats_fixtures() {
        let perfect = entropy_stats(&[row(1.0), row(0.0)], &[true, false], &[true, false]).unwrap();
        assert_eq!(
            (perfect.mec, perfect.mew, perfect.n_wrong),
            (0.0, EPSILON, 0)
        );

        let mixed = entropy_stats(&[row(0.5), row(0.1)], &[true, true], &[true, false]).unwrap();
        assert_eq!(mixed.mec, 1.0);
        assert!((mixed.mew - 0.4689955935892812).abs() < 1e-12);

        let wrong = entropy_stats(&[row(0.5)], &[true], &[false]).unwrap();
        assert_eq!((wrong.mew, wrong.mec), (1.0, EPSILON));
    }

    #[test]
    fn stats_length_mismatch() {
        assert!(matches!(
            entropy_stats(&[row(0.5)], &[true, false], &[true]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn weights_from_ratios() {
        let s = |mew: f64, mec: f64| EntropyStats {
            mec,
            mew,
            n_correct: 1,
            n_wrong: 1,
        };
        let w = ensemble_weights(&[s(0.4, 0.2), s(0.2, 0.2), s(0.1, 0.1)]);
        assert_eq!(w.w, vec![0.5, 0.25, 0.25]);
        let eq = ensemble_weights(&[s(0.3, 0.6); 3]);
        assert!(eq.w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn vote_fixture() {
        let w = EnsembleWeights {
            w: vec![0.5, 0.25, 0.25],
        };
        let v = weighted_vote(&[row(0.9), row(0.6), row(0.8)], &w).unwrap();
        assert!((v.tpp_sale - 0.8).abs() < 1e-12);
        assert!((v.tpp_no_sale - 0.2).abs() < 1e-12);
        assert!(v.pseudo_label);
        assert!((v.confidence - 2.3 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vote_tie_is_no_sale() {
        let v = weighted_vote(&[row(0.5); 3], &EnsembleWeights::uniform(3)).unwrap();
        assert!(!v.pseudo_label);
        assert_eq!(v.confidence, 0.5);
    }

    proptest! {
        #[test]
        fn weights_are_scale_invariant(
            r in proptest::collection::vec(0.01f64..10.0, 3),
            k in 0.1f64..100.0,
        ) {
            let a = EnsembleWeights::from_ratios(&r);
            let scaled: Vec<f64> = r.iter().map(|v| v * k).collect();
            let b = EnsembleWeights::from_ratios(&scaled);
            for (x, y) in a.w.iter().zip(&b.w) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn confidence_ignores_weights(
            p in proptest::collection::vec(0.0f64..1.0, 3),
            w1 in proptest::collection::vec(0.01f64..1.0, 3),
            w2 in proptest::collection::vec(0.01f64..1.0, 3),
        ) {
            let rows: Vec<_> = p.iter().map(|v| row(*v)).collect();
            let a = weighted_vote(&rows, &EnsembleWeights::from_ratios(&w1)).unwrap();
            let b = weighted_vote(&rows, &EnsembleWeights::from_ratios(&w2)).unwrap();
            if a.pseudo_label == b.pseudo_label {
                prop_assert_eq!(a.confidence, b.confidence);
            }
            prop_assert!((a.tpp_sale + a.tpp_no_sale - 1.0).abs() < 1e-9);
        }
    }
}
