use serde::{Deserialize, Serialize};

use super::{evaluate_predictions, MetricSet};
use crate::corpus::LabelSet;
use crate::embeddings::FeatureVector;
use crate::error::{Error, Result};
use crate::pipeline::{train_pipeline, EmbeddingState, PipelineConfig, TrainingSets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepOutcome {
    Done { macro_metrics: MetricSet },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub fraction: f64,
    pub seed: u64,
    pub n_labeled: usize,
    pub outcome: SweepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub fraction: f64,
    pub completed: usize,
    pub skipped: usize,
    pub mean: Option<MetricSet>,
    pub std: Option<MetricSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SweepSummary>,
}

fn summarize(fraction: f64, cells: &[&SweepCell]) -> SweepSummary {
    let done: Vec<MetricSet> = cells
        .iter()
        .filter_map(|c| match &c.outcome {
            SweepOutcome::Done { macro_metrics } => Some(*macro_metrics),
            SweepOutcome::Skipped { .. } => None,
        })
        .collect();
    let n = done.len() as f64;
    let stat = |f: fn(&MetricSet) -> f64| {
        let mean = done.iter().map(f).sum::<f64>() / n;
        let var = done.iter().map(|m| (f(m) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (mean, std) = if done.is_empty() {
        (None, None)
    } else {
        let (a, b, c, d) = (
            stat(|m| m.accuracy),
            stat(|m| m.f1),
            stat(|m| m.mcc),
            stat(|m| m.tmcc),
        );
        (
            Some(MetricSet {
                accuracy: a.0,
                f1: b.0,
                mcc: c.0,
                tmcc: d.0,
            }),
            Some(MetricSet {
                accuracy: a.1,
                f1: b.1,
                mcc: c.1,
                tmcc: d.1,
            }),
        )
    };
    SweepSummary {
        fraction,
        completed: done.len(),
        skipped: cells.len() - done.len(),
        mean,
        std,
    }
}

/// Trains the full pipeline once per (fraction, seed) cell on a label
/// subsample of the training split and scores it on the fixed test split.
///
/// A cell whose subsample cannot be fitted (a label with a single class) is
/// kept as skipped with the reason.
pub fn labeled_fraction_sweep(
    sets: &TrainingSets,
    test: &[FeatureVector],
    test_labels: &[LabelSet],
    fractions: &[f64],
    seeds: &[u64],
    cfg: &PipelineConfig,
    embedding: &EmbeddingState,
) -> Result<SweepReport> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Config(format!("fraction {f} outside (0, 1]")));
    }
    if test.is_empty() {
        return Err(Error::Config("sweep needs a non-empty test split".into()));
    }
    let mut cells = Vec::new();
    for &fraction in fractions {
        for &seed in seeds {
            let subset = sets.with_label_fraction(fraction, seed)?;
            let cell_cfg = cfg.reseeded(seed);
            let outcome = match train_pipeline(&subset, &cell_cfg, embedding.clone()) {
                Ok(model) => {
                    let preds = model.predict_all(test)?;
                    let report = evaluate_predictions(&preds, test_labels)?;
                    SweepOutcome::Done {
                        macro_metrics: report.macro_avg,
                    }
                }
                Err(Error::Fit(reason)) => SweepOutcome::Skipped { reason },
                Err(e) => return Err(e),
            };
            log::info!("sweep fraction {fraction} seed {seed}: {outcome:?}");
            cells.push(SweepCell {
                fraction,
                seed,
                n_labeled: subset.train.len(),
                outcome,
            });
        }
    }
    let summary = fractions
        .iter()
        .map(|&f| {
            let group: Vec<&SweepCell> = cells.iter().filter(|c| c.fraction == f).collect();
            summarize(f, &group)
        })
        .collect();
    Ok(SweepReport { cells, summary })
}

/// `fraction,seed,accuracy,f1,tmcc`, one line per completed cell.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("fraction,seed,accuracy,f1,tmcc\n");
    for c in &report.cells {
        if let SweepOutcome::Done { macro_metrics: m } = &c.outcome {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.fraction, c.seed, m.accuracy, m.f1, m.tmcc
            ));
        }
    }
    out
}
