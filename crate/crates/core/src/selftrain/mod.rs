//! Self-training for both stages and sequential prediction.
//!
//! Stage 1 grows the training pool of an entropy-weighted ensemble with
//! confidently voted unlabeled documents. Stage 2 does the same, per
//! category, for a single learner on documents Stage 1 considers sales.

mod stage2;

pub use stage2::{train_stage2, CategoryConfig, CategoryModel, CategoryModels, Stage2Config};

use serde::{Deserialize, Serialize};

use crate::embeddings::FeatureVector;
use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, Matrix, ProbabilityRow, TrainedLearner};
use crate::voting::{ensemble_weights, entropy_stats, weighted_vote, EnsembleWeights, VoteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseConfig {
    pub theta: f64,
    pub max_iterations: usize,
    pub learners: Vec<LearnerSpec>,
    pub seed: u64,
}

impl SseConfig {
    /// The tuned Stage 1 setup: three members, threshold 0.9, 75 rounds.
    pub fn tuned(seed: u64) -> Self {
        Self {
            theta: 0.9,
            max_iterations: 75,
            learners: LearnerSpec::sse_members(seed).to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Config(
                "the ensemble needs at least one learner".into(),
            ));
        }
        Ok(())
    }

    /// Self-training settings off the tuning grid.
    pub fn out_of_range(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if ![0.8, 0.85, 0.9, 0.95]
            .iter()
            .any(|t| (t - self.theta).abs() < 1e-12)
        {
            flags.push("theta");
        }
        if ![25, 50, 75, 100].contains(&self.max_iterations) {
            flags.push("max_iterations");
        }
        flags
    }
}

/// One pseudo-labeled sample moved into a training pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Addition {
    pub id: String,
    pub label: bool,
    pub confidence: f64,
}

/// One self-training round, as written to the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub stage: String,
    pub iteration: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Vec<f64>>,
    pub mec: Vec<f64>,
    pub mew: Vec<f64>,
    pub added: usize,
    pub pool_remaining: usize,
    pub additions: Vec<Addition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseModel {
    pub learners: Vec<TrainedLearner>,
    pub weights: EnsembleWeights,
    pub history: Vec<IterationRecord>,
}

impl SseModel {
    pub fn feature_dim(&self) -> usize {
        self.learners[0].feature_dim()
    }

    pub fn member_rows(&self, x: &[f64]) -> Result<Vec<ProbabilityRow>> {
        self.learners.iter().map(|l| l.predict_row(x)).collect()
    }

    pub fn vote(&self, x: &[f64]) -> Result<VoteResult> {
        weighted_vote(&self.member_rows(x)?, &self.weights)
    }
}

pub(crate) fn matrix_of<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Matrix> {
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    Matrix::from_rows(&rows)
}

pub(crate) fn check_dims(vectors: &[&FeatureVector], dim: usize, what: &str) -> Result<()> {
    match vectors.iter().find(|v| v.values.len() != dim) {
        Some(v) => Err(Error::Shape(format!(
            "{what} vector `{}` has {} features, expected {dim}",
            v.id,
            v.values.len()
        ))),
        None => Ok(()),
    }
}

struct Ensemble {
    learners: Vec<TrainedLearner>,
    weights: EnsembleWeights,
    mec: Vec<f64>,
    mew: Vec<f64>,
}

fn fit_ensemble(
    specs: &[LearnerSpec],
    x: &Matrix,
    y: &[bool],
    val_x: &Matrix,
    val_y: &[bool],
    iteration: usize,
) -> Result<Ensemble> {
    let mut learners = Vec::with_capacity(specs.len());
    let mut stats = Vec::with_capacity(specs.len());
    for spec in specs {
        let learner = TrainedLearner::fit(spec, x, y).map_err(|e| match e {
            Error::Fit(m) => Error::Fit(format!(
                "iteration {iteration}, {}: {m}",
                spec.kind().as_str()
            )),
            other => other,
        })?;
        let rows = learner.predict_proba(val_x)?;
        let pred: Vec<bool> = rows.iter().map(ProbabilityRow::predicted).collect();
        stats.push(entropy_stats(&rows, val_y, &pred)?);
        learners.push(learner);
    }
    Ok(Ensemble {
        learners,
        weights: ensemble_weights(&stats),
        mec: stats.iter().map(|s| s.mec).collect(),
        mew: stats.iter().map(|s| s.mew).collect(),
    })
}

/// Fits the ensemble once on labeled data, with validation-derived weights.
pub fn train_supervised_ensemble(
    train: &[FeatureVector],
    y_train: &[bool],
    validation: &[FeatureVector],
    y_validation: &[bool],
    specs: &[LearnerSpec],
) -> Result<SseModel> {
    let x = matrix_of(train.iter().map(|v| v.values.as_slice()))?;
    let vx = matrix_of(validation.iter().map(|v| v.values.as_slice()))?;
    if validation.is_empty() {
        return Err(Error::Shape("validation set is empty".into()));
    }
    let e = fit_ensemble(specs, &x, y_train, &vx, y_validation, 1)?;
    Ok(SseModel {
        learners: e.learners,
        weights: e.weights,
        history: Vec::new(),
    })
}

/// Stage 1 self-training.
///
/// Each round fits every member on the current pool, re-weights them on the
/// validation set and moves every unlabeled sample whose vote confidence is at
/// least `theta` into the pool with its voted label. Training stops after
/// `max_iterations` rounds, when the unlabeled pool is empty, or when a round
/// adds nothing. If the last round added samples the members are refitted.
pub fn train_sse(
    train: &[FeatureVector],
    y_train: &[bool],
    validation: &[FeatureVector],
    y_validation: &[bool],
    unlabeled: &[FeatureVector],
    cfg: &SseConfig,
) -> Result<SseModel> {
    cfg.validate()?;
    if train.len() != y_train.len() || validation.len() != y_validation.len() {
        return Err(Error::Shape("feature and label counts differ".into()));
    }
    if validation.is_empty() {
        return Err(Error::Shape("validation set is empty".into()));
    }
    let dim = train.first().map_or(0, |v| v.values.len());
    check_dims(&train.iter().collect::<Vec<_>>(), dim, "train")?;
    check_dims(&validation.iter().collect::<Vec<_>>(), dim, "validation")?;
    check_dims(&unlabeled.iter().collect::<Vec<_>>(), dim, "unlabeled")?;

    let val_x = matrix_of(validation.iter().map(|v| v.values.as_slice()))?;
    let mut pool: Vec<&[f64]> = train.iter().map(|v| v.values.as_slice()).collect();
    let mut pool_y: Vec<bool> = y_train.to_vec();
    let mut remaining: Vec<usize> = (0..unlabeled.len()).collect();
    let mut history = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        let x = matrix_of(pool.iter().copied())?;
        let ensemble = fit_ensemble(&cfg.learners, &x, &pool_y, &val_x, y_validation, iteration)?;

        let mut keep = Vec::with_capacity(remaining.len());
        let mut additions = Vec::new();
        let mut added_idx = Vec::new();
        for &u in &remaining {
            let rows: Vec<ProbabilityRow> = ensemble
                .learners
                .iter()
                .map(|l| l.predict_row(&unlabeled[u].values))
                .collect::<Result<_>>()?;
            let vote = weighted_vote(&rows, &ensemble.weights)?;
            if vote.confidence >= cfg.theta {
                additions.push(Addition {
                    id: unlabeled[u].id.clone(),
                    label: vote.pseudo_label,
                    confidence: vote.confidence,
                });
                added_idx.push(u);
            } else {
                keep.push(u);
            }
        }
        remaining = keep;
        log::info!(
            "sse iteration {iteration}: weights {:?}, added {}, pool {}",
            ensemble.weights.w,
            additions.len(),
            remaining.len()
        );
        history.push(IterationRecord {
            stage: "sse".into(),
            iteration,
            weights: Some(ensemble.weights.w.clone()),
            mec: ensemble.mec.clone(),
            mew: ensemble.mew.clone(),
            added: additions.len(),
            pool_remaining: remaining.len(),
            additions: additions.clone(),
        });

        if additions.is_empty() {
            return Ok(SseModel {
                learners: ensemble.learners,
                weights: ensemble.weights,
                history,
            });
        }
        for (u, a) in added_idx.iter().zip(&additions) {
            pool.push(&unlabeled[*u].values);
            pool_y.push(a.label);
        }
        if remaining.is_empty() || iteration == cfg.max_iterations {
            break;
        }
    }

    let x = matrix_of(pool.iter().copied())?;
    let last = history.len() + 1;
    let ensemble = fit_ensemble(&cfg.learners, &x, &pool_y, &val_x, y_validation, last)?;
    Ok(SseModel {
        learners: ensemble.learners,
        weights: ensemble.weights,
        history,
    })
}

/// Sequential output for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub sale: bool,
    pub sale_confidence: f64,
    pub p_sale: f64,
    pub drug: bool,
    pub weapon: bool,
    pub credential: bool,
    pub p_drug: Option<f64>,
    pub p_weapon: Option<f64>,
    pub p_credential: Option<f64>,
    pub stage2_evaluated: bool,
}

impl PredictionRecord {
    pub fn labels(&self) -> crate::corpus::LabelSet {
        crate::corpus::LabelSet {
            sale: self.sale,
            drug: self.drug,
            weapon: self.weapon,
            credential: self.credential,
        }
    }
}

/// Category probabilities above this value yield a positive tag.
pub const CATEGORY_THRESHOLD: f64 = 0.5;

pub fn predict(
    sse: &SseModel,
    categories: &CategoryModels,
    x: &FeatureVector,
) -> Result<PredictionRecord> {
    let vote = sse.vote(&x.values)?;
    let mut record = PredictionRecord {
        id: x.id.clone(),
        sale: vote.pseudo_label,
        sale_confidence: vote.confidence,
        p_sale: vote.tpp_sale,
        drug: false,
        weapon: false,
        credential: false,
        p_drug: None,
        p_weapon: None,
        p_credential: None,
        stage2_evaluated: false,
    };
    if !vote.pseudo_label {
        return Ok(record);
    }
    let p = |m: &CategoryModel| m.learner.predict_row(&x.values).map(|r| r.p_positive);
    let (pd, pw, pc) = (
        p(&categories.drug)?,
        p(&categories.weapon)?,
        p(&categories.credential)?,
    );
    record.p_drug = Some(pd);
    record.p_weapon = Some(pw);
    record.p_credential = Some(pc);
    record.drug = pd > CATEGORY_THRESHOLD;
    record.weapon = pw > CATEGORY_THRESHOLD;
    record.credential = pc > CATEGORY_THRESHOLD;
    record.stage2_evaluated = true;
    Ok(record)
}
