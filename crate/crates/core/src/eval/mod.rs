//! Classification metrics, evaluation reports, Friedman ranking and
//! labeled-fraction sweeps.

mod friedman;
mod gamma;
mod sweep;

pub use friedman::{friedman_rank, rank_score_table, MetricRanking, RankReport, ScoreRow};
pub use gamma::{chi_square_sf, ln_gamma, regularized_gamma_q};
pub use sweep::{
    labeled_fraction_sweep, sweep_csv, SweepCell, SweepOutcome, SweepReport, SweepSummary,
};

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabelSet};
use crate::error::{Error, Result};
use crate::selftrain::PredictionRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn from_pairs(truth: &[bool], predicted: &[bool]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::default();
        truth
            .iter()
            .zip(predicted)
            .for_each(|(t, p)| cm.record(*t, *p));
        Ok(cm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
    pub tmcc: f64,
}

/// Accuracy, F1, MCC and TMCC of one confusion matrix.
///
/// Precision, recall and F1 are 0 when their denominators vanish; MCC is 0
/// (TMCC 0.5) when any marginal is empty.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain("confusion matrix is empty".into()));
    }
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let accuracy = (tp + tn) / total as f64;
    let precision = if cm.tp + cm.fp == 0 {
        0.0
    } else {
        tp / (tp + fp)
    };
    let recall = if cm.tp + cm.fn_ == 0 {
        0.0
    } else {
        tp / (tp + fn_)
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom.sqrt()
    };
    Ok(MetricSet {
        accuracy,
        f1,
        mcc,
        tmcc: (mcc + 1.0) / 2.0,
    })
}

/// Arithmetic mean of each metric over the four labels.
pub fn macro_metrics(per_label: &[MetricSet; 4]) -> MetricSet {
    let mean = |f: fn(&MetricSet) -> f64| per_label.iter().map(f).sum::<f64>() / 4.0;
    MetricSet {
        accuracy: mean(|m| m.accuracy),
        f1: mean(|m| m.f1),
        mcc: mean(|m| m.mcc),
        tmcc: mean(|m| m.tmcc),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: Label,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_documents: usize,
    pub per_label: Vec<LabelReport>,
    #[serde(rename = "macro")]
    pub macro_avg: MetricSet,
}

/// Scores sequential predictions against ground truth, label by label.
pub fn evaluate_predictions(
    predictions: &[PredictionRecord],
    truth: &[LabelSet],
) -> Result<EvaluationReport> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labeled documents",
            predictions.len(),
            truth.len()
        )));
    }
    let mut per_label = Vec::with_capacity(4);
    for label in Label::ALL {
        let mut cm = ConfusionMatrix::default();
        for (p, t) in predictions.iter().zip(truth) {
            cm.record(t.get(label), p.labels().get(label));
        }
        per_label.push(LabelReport {
            label,
            confusion: cm,
            metrics: metrics(&cm)?,
        });
    }
    let sets = [0, 1, 2, 3].map(|i| per_label[i].metrics);
    Ok(EvaluationReport {
        n_documents: predictions.len(),
        per_label,
        macro_avg: macro_metrics(&sets),
    })
}
