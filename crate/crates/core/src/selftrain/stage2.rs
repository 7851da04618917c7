use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_dims, matrix_of, Addition, IterationRecord};
use crate::corpus::{Category, LabelSet};
use crate::embeddings::FeatureVector;
use crate::error::{Error, Result};
use crate::learners::{GbdtParams, LearnerParams, LearnerSpec, ProbabilityRow, TrainedLearner};
use crate::rng;
use crate::voting::entropy_stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryConfig {
    pub theta: f64,
    pub max_iterations: usize,
    pub learner: LearnerSpec,
}

impl CategoryConfig {
    /// Whether a pool sample with this category probability becomes a positive.
    pub fn admits(&self, p: f64) -> bool {
        p >= self.theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Config {
    pub drug: CategoryConfig,
    pub weapon: CategoryConfig,
    pub credential: CategoryConfig,
    /// Fraction of each category's labeled sales held out for validation.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    pub seed: u64,
}

fn default_validation_fraction() -> f64 {
    0.2
}

impl Stage2Config {
    pub fn tuned(seed: u64) -> Self {
        let cat = |theta, max_iterations, params| CategoryConfig {
            theta,
            max_iterations,
            learner: LearnerSpec::new(LearnerParams::Gbdt(params), seed),
        };
        Self {
            drug: cat(0.9, 25, GbdtParams::drug()),
            weapon: cat(0.85, 25, GbdtParams::weapon()),
            credential: cat(0.9, 50, GbdtParams::credential()),
            validation_fraction: default_validation_fraction(),
            seed,
        }
    }

    pub fn get(&self, category: Category) -> &CategoryConfig {
        match category {
            Category::Drug => &self.drug,
            Category::Weapon => &self.weapon,
            Category::Credential => &self.credential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "stage 2 validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        for c in Category::ALL {
            let cfg = self.get(c);
            if !(cfg.theta > 0.0 && cfg.theta <= 1.0) || cfg.max_iterations == 0 {
                return Err(Error::Config(format!(
                    "{}: theta must lie in (0, 1] and max_iterations be positive",
                    c.as_str()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    pub category: Category,
    pub learner: TrainedLearner,
    pub theta: f64,
    pub max_iterations: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModels {
    pub drug: CategoryModel,
    pub weapon: CategoryModel,
    pub credential: CategoryModel,
}

impl CategoryModels {
    pub fn get(&self, category: Category) -> &CategoryModel {
        match category {
            Category::Drug => &self.drug,
            Category::Weapon => &self.weapon,
            Category::Credential => &self.credential,
        }
    }
}

/// Stratified hold-out that always leaves at least one sample of each class
/// in the training part. Returns (train, validation) index lists.
pub(crate) fn stratified_holdout(y: &[bool], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::seeded(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_val = ((fraction * idx.len() as f64 + 1e-9).floor() as usize)
            .min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn train_category(
    category: Category,
    sales: &[&FeatureVector],
    labels: &[bool],
    pool: &[FeatureVector],
    cfg: &CategoryConfig,
    validation_fraction: f64,
    seed: u64,
) -> Result<CategoryModel> {
    let name = category.as_str();
    let positives = labels.iter().filter(|v| **v).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Fit(format!(
            "{name}: labeled sales are single-class ({} samples, {positives} positive)",
            labels.len()
        )));
    }
    let (train_idx, val_idx) = stratified_holdout(labels, validation_fraction, seed);
    let val_x = matrix_of(val_idx.iter().map(|&i| sales[i].values.as_slice()))?;
    let val_y: Vec<bool> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut x_rows: Vec<&[f64]> = train_idx
        .iter()
        .map(|&i| sales[i].values.as_slice())
        .collect();
    let mut y: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut history = Vec::new();

    let fit = |x_rows: &[&[f64]], y: &[bool], iteration: usize| -> Result<TrainedLearner> {
        let x = matrix_of(x_rows.iter().copied())?;
        TrainedLearner::fit(&cfg.learner, &x, y).map_err(|e| match e {
            Error::Fit(m) => Error::Fit(format!("{name}, iteration {iteration}: {m}")),
            other => other,
        })
    };

    for iteration in 1..=cfg.max_iterations {
        let learner = fit(&x_rows, &y, iteration)?;
        let (mec, mew) = if val_y.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            let rows = learner.predict_proba(&val_x)?;
            let pred: Vec<bool> = rows.iter().map(ProbabilityRow::predicted).collect();
            let s = entropy_stats(&rows, &val_y, &pred)?;
            (vec![s.mec], vec![s.mew])
        };

        let mut keep = Vec::with_capacity(remaining.len());
        let mut additions = Vec::new();
        for &u in &remaining {
            let p = learner.predict_row(&pool[u].values)?.p_positive;
            if cfg.admits(p) {
                additions.push((u, p));
            } else {
                keep.push(u);
            }
        }
        remaining = keep;
        log::info!(
            "{name} iteration {iteration}: added {}, pool {}",
            additions.len(),
            remaining.len()
        );
        history.push(IterationRecord {
            stage: name.to_string(),
            iteration,
            weights: None,
            mec,
            mew,
            added: additions.len(),
            pool_remaining: remaining.len(),
            additions: additions
                .iter()
                .map(|&(u, p)| Addition {
                    id: pool[u].id.clone(),
                    label: true,
                    confidence: p,
                })
                .collect(),
        });

        if additions.is_empty() {
            return Ok(CategoryModel {
                category,
                learner,
                theta: cfg.theta,
                max_iterations: cfg.max_iterations,
                history,
            });
        }
        for &(u, _) in &additions {
            x_rows.push(&pool[u].values);
            y.push(true);
        }
        if remaining.is_empty() || iteration == cfg.max_iterations {
            break;
        }
    }
    let learner = fit(&x_rows, &y, history.len() + 1)?;
    Ok(CategoryModel {
        category,
        learner,
        theta: cfg.theta,
        max_iterations: cfg.max_iterations,
        history,
    })
}

/// Stage 2 self-training.
///
/// Every category learner is trained on the labeled sales only, with its own
/// seeded hold-out split, and independently scores the whole sale pool. A
/// pool sample joins a category's training set as a positive once that
/// category's probability reaches its threshold; a sample may join several
/// categories.
pub fn train_stage2(
    labeled: &[FeatureVector],
    labels: &[LabelSet],
    sale_pool: &[FeatureVector],
    cfg: &Stage2Config,
) -> Result<CategoryModels> {
    cfg.validate()?;
    if labeled.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} labeled vectors but {} label sets",
            labeled.len(),
            labels.len()
        )));
    }
    let sales: Vec<&FeatureVector> = labeled
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.sale)
        .map(|(v, _)| v)
        .collect();
    let sale_labels: Vec<&LabelSet> = labels.iter().filter(|l| l.sale).collect();
    let dim = labeled.first().map_or(0, |v| v.values.len());
    check_dims(&sales, dim, "labeled")?;
    check_dims(&sale_pool.iter().collect::<Vec<_>>(), dim, "pool")?;

    let mut models = Vec::with_capacity(3);
    for category in Category::ALL {
        let y: Vec<bool> = sale_labels.iter().map(|l| l.category(category)).collect();
        let seed = cfg.seed.wrapping_add(category.index() as u64);
        models.push(train_category(
            category,
            &sales,
            &y,
            sale_pool,
            cfg.get(category),
            cfg.validation_fraction,
            seed,
        )?);
    }
    let credential = models.pop().expect("three categories");
    let weapon = models.pop().expect("three categories");
    let drug = models.pop().expect("three categories");
    Ok(CategoryModels {
        drug,
        weapon,
        credential,
    })
}
