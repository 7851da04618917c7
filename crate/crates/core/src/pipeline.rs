//! End-to-end wiring: documents to feature vectors, two-stage training,
//! sequential prediction and model bundles.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Category, DatasetSplit, Document, LabelSet};
use crate::embeddings::{
    concat_features, tfidf_fit, Embedder, EmbeddingSource, EmbeddingTable, FeatureVector,
    TfidfConfig, TfidfModel,
};
use crate::error::{Error, Result};
use crate::features::assemble_manual_features;
use crate::learners::{GbdtParams, LearnerParams, LearnerSpec, TrainedLearner};
use crate::rng;
use crate::selftrain::{
    predict, train_sse, train_stage2, train_supervised_ensemble, CategoryModel, CategoryModels,
    IterationRecord, PredictionRecord, SseConfig, SseModel, Stage2Config,
};
use crate::voting::EnsembleWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Table,
    Tfidf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sse: SseConfig,
    pub stage2: Stage2Config,
    #[serde(default)]
    pub tfidf: TfidfConfig,
}

impl PipelineConfig {
    pub fn tuned(seed: u64) -> Self {
        Self {
            sse: SseConfig::tuned(seed),
            stage2: Stage2Config::tuned(seed),
            tfidf: TfidfConfig::default(),
        }
    }

    /// The same configuration with every seed replaced by `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.sse.seed = seed;
        out.sse.learners.iter_mut().for_each(|l| l.seed = seed);
        out.stage2.seed = seed;
        for c in [
            &mut out.stage2.drug,
            &mut out.stage2.weapon,
            &mut out.stage2.credential,
        ] {
            c.learner.seed = seed;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.sse.validate()?;
        self.stage2.validate()?;
        if self.tfidf.max_features == 0 {
            return Err(Error::Config("tfidf.max_features must be positive".into()));
        }
        Ok(())
    }
}

/// What a bundle needs to embed new documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingState {
    /// Vectors come from an external table of this width.
    Table {
        dim: usize,
    },
    Tfidf {
        model: TfidfModel,
    },
}

impl EmbeddingState {
    pub fn source(&self) -> EmbeddingSource {
        match self {
            EmbeddingState::Table { dim } => EmbeddingSource::Table { dim: *dim },
            EmbeddingState::Tfidf { model } => EmbeddingSource::Tfidf { dim: model.dim() },
        }
    }

    /// Builds the embedder; table mode needs the table the bundle was trained with
    /// (or one of the same width).
    pub fn embedder(&self, table: Option<EmbeddingTable>) -> Result<Embedder> {
        match (self, table) {
            (EmbeddingState::Tfidf { model }, _) => Ok(Embedder::Tfidf(model.clone())),
            (EmbeddingState::Table { dim }, Some(t)) => {
                if t.dim() != *dim {
                    return Err(Error::Shape(format!(
                        "embedding table has dimension {}, model expects {dim}",
                        t.dim()
                    )));
                }
                Ok(Embedder::Table(t))
            }
            (EmbeddingState::Table { .. }, None) => Err(Error::Config(
                "this model uses table embeddings; an embeddings file is required".into(),
            )),
        }
    }

    pub fn from_embedder(embedder: &Embedder) -> Self {
        match embedder {
            Embedder::Table(t) => EmbeddingState::Table { dim: t.dim() },
            Embedder::Tfidf(m) => EmbeddingState::Tfidf { model: m.clone() },
        }
    }
}

/// Fits TF-IDF on the given documents.
pub fn fit_tfidf_embedder(docs: &[&Document], config: TfidfConfig) -> Result<Embedder> {
    let texts: Vec<&str> = docs.iter().map(|d| d.raw_text.as_str()).collect();
    Ok(Embedder::Tfidf(tfidf_fit(&texts, config)?))
}

/// `[embedding || manual]` vectors, in document order.
pub fn featurize<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    embedder: &Embedder,
) -> Result<Vec<FeatureVector>> {
    let source = embedder.source();
    docs.into_iter()
        .map(|d| {
            let emb = embedder.embed(d)?;
            concat_features(&d.id, &emb, source, &d.id, &assemble_manual_features(d))
        })
        .collect()
}

/// Documents grouped by role.
#[derive(Debug, Clone, Default)]
pub struct CorpusPartition<'a> {
    pub train: Vec<&'a Document>,
    pub validation: Vec<&'a Document>,
    pub test: Vec<&'a Document>,
    pub unlabeled: Vec<&'a Document>,
}

impl<'a> CorpusPartition<'a> {
    /// Routes labeled documents by the split and everything else to the pool.
    pub fn new(docs: &'a [Document], split: &DatasetSplit) -> Result<Self> {
        let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
        let lookup = |ids: &[String]| -> Result<Vec<&'a Document>> {
            ids.iter()
                .map(|id| {
                    let d = *by_id
                        .get(id.as_str())
                        .ok_or_else(|| Error::Join(format!("split id `{id}` not in corpus")))?;
                    if d.labels.is_none() {
                        return Err(Error::Join(format!("split id `{id}` is unlabeled")));
                    }
                    Ok(d)
                })
                .collect()
        };
        let train = lookup(&split.train)?;
        let validation = lookup(&split.validation)?;
        let test = lookup(&split.test)?;
        let unlabeled = docs.iter().filter(|d| d.labels.is_none()).collect();
        Ok(Self {
            train,
            validation,
            test,
            unlabeled,
        })
    }

    /// Every document except the test split, which embedding fits must not see.
    pub fn fit_documents(&self) -> Vec<&'a Document> {
        self.train
            .iter()
            .chain(&self.validation)
            .chain(&self.unlabeled)
            .copied()
            .collect()
    }
}

fn labels_of(docs: &[&Document]) -> Vec<LabelSet> {
    docs.iter().map(|d| d.labels.unwrap_or_default()).collect()
}

/// Feature vectors and labels for one training run.
#[derive(Debug, Clone)]
pub struct TrainingSets {
    pub train: Vec<FeatureVector>,
    pub train_labels: Vec<LabelSet>,
    pub validation: Vec<FeatureVector>,
    pub validation_labels: Vec<LabelSet>,
    pub unlabeled: Vec<FeatureVector>,
}

impl TrainingSets {
    pub fn build(part: &CorpusPartition<'_>, embedder: &Embedder) -> Result<Self> {
        Ok(Self {
            train: featurize(part.train.iter().copied(), embedder)?,
            train_labels: labels_of(&part.train),
            validation: featurize(part.validation.iter().copied(), embedder)?,
            validation_labels: labels_of(&part.validation),
            unlabeled: featurize(part.unlabeled.iter().copied(), embedder)?,
        })
    }

    /// Keeps labels for `fraction` of the training rows, stratified by label
    /// combination; the other training rows join the unlabeled pool with their
    /// labels hidden.
    pub fn with_label_fraction(&self, fraction: f64, seed: u64) -> Result<Self> {
        let keep = subsample_stratified(&self.train_labels, fraction, seed)?;
        let mut keep_mask = vec![false; self.train.len()];
        keep.iter().for_each(|&i| keep_mask[i] = true);
        let mut out = Self {
            train: Vec::with_capacity(keep.len()),
            train_labels: Vec::with_capacity(keep.len()),
            validation: self.validation.clone(),
            validation_labels: self.validation_labels.clone(),
            unlabeled: self.unlabeled.clone(),
        };
        for (i, v) in self.train.iter().enumerate() {
            if keep_mask[i] {
                out.train.push(v.clone());
                out.train_labels.push(self.train_labels[i]);
            } else {
                out.unlabeled.push(v.clone());
            }
        }
        Ok(out)
    }

    pub fn y_train_sale(&self) -> Vec<bool> {
        self.train_labels.iter().map(|l| l.sale).collect()
    }

    pub fn y_validation_sale(&self) -> Vec<bool> {
        self.validation_labels.iter().map(|l| l.sale).collect()
    }
}

fn signature(l: &LabelSet) -> u8 {
    (l.sale as u8) | (l.drug as u8) << 1 | (l.weapon as u8) << 2 | (l.credential as u8) << 3
}

/// Indices of a label-stratified subsample of `round(fraction * n)` rows
/// (at least one), in ascending order. Stratum quotas use largest remainders.
pub fn subsample_stratified(labels: &[LabelSet], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "label fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = labels.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let total = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut strata: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        strata.entry(signature(l)).or_default().push(i);
    }
    let share = total as f64 / n as f64;
    let mut quotas: Vec<(u8, usize, f64)> = strata
        .iter()
        .map(|(k, v)| {
            let q = share * v.len() as f64;
            (*k, q.floor() as usize, q - q.floor())
        })
        .collect();
    let mut left = total - quotas.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for &o in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quotas[o].1 < strata[&quotas[o].0].len() {
            quotas[o].1 += 1;
            left -= 1;
        }
    }
    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(total);
    for (key, take, _) in quotas {
        let mut idx = strata[&key].clone();
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..take]);
    }
    out.sort_unstable();
    Ok(out)
}

/// A trained two-stage pipeline together with its embedding state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub embedding: EmbeddingState,
    pub sse: SseModel,
    pub categories: CategoryModels,
}

impl PipelineModel {
    pub fn feature_dim(&self) -> usize {
        self.sse.feature_dim()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<PredictionRecord> {
        if x.values.len() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "vector `{}` has {} features, model expects {}",
                x.id,
                x.values.len(),
                self.feature_dim()
            )));
        }
        predict(&self.sse, &self.categories, x)
    }

    pub fn predict_all(&self, xs: &[FeatureVector]) -> Result<Vec<PredictionRecord>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Every self-training round of both stages, Stage 1 first.
    pub fn training_log(&self) -> Vec<&IterationRecord> {
        let c = &self.categories;
        self.sse
            .history
            .iter()
            .chain(&c.drug.history)
            .chain(&c.weapon.history)
            .chain(&c.credential.history)
            .collect()
    }
}

/// Unlabeled vectors that the Stage 1 model votes as sales.
pub fn sale_pool(sse: &SseModel, unlabeled: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    let mut pool = Vec::new();
    for v in unlabeled {
        if sse.vote(&v.values)?.pseudo_label {
            pool.push(v.clone());
        }
    }
    Ok(pool)
}

/// Semi-supervised two-stage training.
pub fn train_pipeline(
    sets: &TrainingSets,
    cfg: &PipelineConfig,
    embedding: EmbeddingState,
) -> Result<PipelineModel> {
    cfg.validate()?;
    let sse = train_sse(
        &sets.train,
        &sets.y_train_sale(),
        &sets.validation,
        &sets.y_validation_sale(),
        &sets.unlabeled,
        &cfg.sse,
    )?;
    let pool = sale_pool(&sse, &sets.unlabeled)?;
    log::info!(
        "stage 2 sale pool: {} of {}",
        pool.len(),
        sets.unlabeled.len()
    );
    let categories = train_stage2(&sets.train, &sets.train_labels, &pool, &cfg.stage2)?;
    Ok(PipelineModel {
        embedding,
        sse,
        categories,
    })
}

/// Supervised reference: one boosted model for Stage 1 and supervised
/// category models, no unlabeled data anywhere.
pub fn train_supervised_gbdt_pipeline(
    sets: &TrainingSets,
    cfg: &PipelineConfig,
    embedding: EmbeddingState,
) -> Result<PipelineModel> {
    cfg.validate()?;
    let spec = cfg
        .sse
        .learners
        .iter()
        .find(|s| matches!(s.params, LearnerParams::Gbdt(_)))
        .copied()
        .unwrap_or_else(|| LearnerSpec::new(LearnerParams::Gbdt(GbdtParams::sse()), cfg.sse.seed));
    let sse = train_supervised_ensemble(
        &sets.train,
        &sets.y_train_sale(),
        &sets.validation,
        &sets.y_validation_sale(),
        &[spec],
    )?;
    let categories = train_stage2(&sets.train, &sets.train_labels, &[], &cfg.stage2)?;
    Ok(PipelineModel {
        embedding,
        sse,
        categories,
    })
}

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleManifest {
    format_version: u32,
    feature_dim: usize,
    stage1_learners: Vec<String>,
    stage2_models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stage1State {
    weights: EnsembleWeights,
    history: Vec<IterationRecord>,
}

fn to_json_pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = crate::io::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the model as a directory of JSON files, replacing `dir` atomically.
pub fn save_bundle(dir: &Path, model: &PipelineModel) -> Result<()> {
    crate::io::write_dir_atomic(dir, |tmp| {
        let mut stage1_learners = Vec::new();
        let learners_dir = tmp.join("learners");
        std::fs::create_dir_all(&learners_dir).map_err(|e| Error::io(&learners_dir, e))?;
        for (i, l) in model.sse.learners.iter().enumerate() {
            let name = format!("learners/stage1_{i}_{}.json", l.spec().kind().as_str());
            write_file(&tmp.join(&name), &to_json_pretty(l)?)?;
            stage1_learners.push(name);
        }
        let mut stage2_models = Vec::new();
        for c in Category::ALL {
            let name = format!("learners/stage2_{}.json", c.as_str());
            write_file(&tmp.join(&name), &to_json_pretty(model.categories.get(c))?)?;
            stage2_models.push(name);
        }
        let state = Stage1State {
            weights: model.sse.weights.clone(),
            history: model.sse.history.clone(),
        };
        write_file(&tmp.join("stage1.json"), &to_json_pretty(&state)?)?;
        write_file(
            &tmp.join("embedding.json"),
            &to_json_pretty(&model.embedding)?,
        )?;
        let manifest = BundleManifest {
            format_version: BUNDLE_FORMAT_VERSION,
            feature_dim: model.feature_dim(),
            stage1_learners,
            stage2_models,
        };
        write_file(&tmp.join("manifest.json"), &to_json_pretty(&manifest)?)
    })
}

pub fn load_bundle(dir: &Path) -> Result<PipelineModel> {
    let manifest: BundleManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported bundle format version {}",
            manifest.format_version
        )));
    }
    let learners: Vec<TrainedLearner> = manifest
        .stage1_learners
        .iter()
        .map(|n| read_json(&dir.join(n)))
        .collect::<Result<_>>()?;
    let mut cats: Vec<CategoryModel> = manifest
        .stage2_models
        .iter()
        .map(|n| read_json(&dir.join(n)))
        .collect::<Result<_>>()?;
    if learners.is_empty() || cats.len() != 3 {
        return Err(Error::Format(
            "bundle must hold stage 1 learners and three category models".into(),
        ));
    }
    let state: Stage1State = read_json(&dir.join("stage1.json"))?;
    if state.weights.len() != learners.len() {
        return Err(Error::Format(
            "stage 1 weight count does not match learners".into(),
        ));
    }
    let embedding = match read_json(&dir.join("embedding.json"))? {
        EmbeddingState::Tfidf { model } => EmbeddingState::Tfidf {
            model: model.reindexed(),
        },
        table => table,
    };
    let dims_ok = learners
        .iter()
        .all(|l| l.feature_dim() == manifest.feature_dim)
        && cats
            .iter()
            .all(|c| c.learner.feature_dim() == manifest.feature_dim)
        && embedding.source().dim() + crate::features::MANUAL_FEATURE_COUNT == manifest.feature_dim;
    if !dims_ok {
        return Err(Error::Format(
            "bundle members disagree on feature dimension".into(),
        ));
    }
    let credential = cats.pop().expect("three");
    let weapon = cats.pop().expect("three");
    let drug = cats.pop().expect("three");
    for (m, c) in [&drug, &weapon, &credential].iter().zip(Category::ALL) {
        if m.category != c {
            return Err(Error::Format(format!(
                "category model out of order: expected {}",
                c.as_str()
            )));
        }
    }
    Ok(PipelineModel {
        embedding,
        sse: SseModel {
            learners,
            weights: state.weights,
            history: state.history,
        },
        categories: CategoryModels {
            drug,
            weapon,
            credential,
        },
    })
}

/// The training log as JSON Lines.
pub fn training_log_jsonl(model: &PipelineModel) -> Result<Vec<u8>> {
    crate::io::to_jsonl(&model.training_log())
}
