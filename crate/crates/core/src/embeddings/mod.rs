//! Dense document representations and their concatenation with the manual block.

mod table;
mod tfidf;

pub use table::{load_embedding_table, EmbeddingTable, VectorRow};
pub use tfidf::{tfidf_embed, tfidf_fit, tokenize, TfidfConfig, TfidfModel};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::features::{ManualFeatureVector, MANUAL_FEATURE_COUNT};

/// Identifies which provider filled the embedding block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSource {
    Table { dim: usize },
    Tfidf { dim: usize },
}

impl EmbeddingSource {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingSource::Table { dim } | EmbeddingSource::Tfidf { dim } => *dim,
        }
    }
}

/// `[embedding || manual]` for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
    pub source: EmbeddingSource,
}

impl FeatureVector {
    pub fn embedding(&self) -> &[f64] {
        &self.values[..self.source.dim()]
    }

    pub fn manual(&self) -> &[f64] {
        &self.values[self.source.dim()..]
    }
}

/// Joins an embedding row with a manual row; ids must agree.
pub fn concat_features(
    id: &str,
    embedding: &[f64],
    source: EmbeddingSource,
    manual_id: &str,
    manual: &ManualFeatureVector,
) -> Result<FeatureVector> {
    if id != manual_id {
        return Err(Error::Join(format!(
            "embedding row `{id}` paired with manual row `{manual_id}`"
        )));
    }
    if embedding.len() != source.dim() {
        return Err(Error::Shape(format!(
            "embedding for `{id}` has dimension {}, expected {}",
            embedding.len(),
            source.dim()
        )));
    }
    let mut values = Vec::with_capacity(embedding.len() + MANUAL_FEATURE_COUNT);
    values.extend_from_slice(embedding);
    values.extend_from_slice(&manual.values);
    Ok(FeatureVector {
        id: id.to_string(),
        values,
        source,
    })
}

/// A fitted embedding provider.
#[derive(Debug, Clone)]
pub enum Embedder {
    Table(EmbeddingTable),
    Tfidf(TfidfModel),
}

impl Embedder {
    pub fn source(&self) -> EmbeddingSource {
        match self {
            Embedder::Table(t) => EmbeddingSource::Table { dim: t.dim() },
            Embedder::Tfidf(m) => EmbeddingSource::Tfidf { dim: m.dim() },
        }
    }

    pub fn embed(&self, doc: &Document) -> Result<Vec<f64>> {
        match self {
            Embedder::Table(t) => t
                .get(&doc.id)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::Join(format!("no embedding row for `{}`", doc.id))),
            Embedder::Tfidf(m) => Ok(tfidf_embed(m, &doc.raw_text)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manual() -> ManualFeatureVector {
        let mut values = [0.0; MANUAL_FEATURE_COUNT];
        values
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i as f64 + 0.5);
        ManualFeatureVector { values }
    }

    #[test]
    fn concat_layout() {
        let m = manual();
        let fv =
            concat_features("a", &[0.0; 4], EmbeddingSource::Tfidf { dim: 4 }, "a", &m).unwrap();
        assert_eq!(fv.values.len(), 35);
        assert_eq!(fv.manual(), &m.values[..]);
        assert_eq!(fv.embedding(), &[0.0; 4]);
    }

    #[test]
    fn id_mismatch_is_join_error() {
        let err = concat_features(
            "a",
            &[1.0],
            EmbeddingSource::Table { dim: 1 },
            "b",
            &manual(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Join(_)));
    }

    #[test]
    fn provider_swap_only_changes_embedding_block() {
        let m = manual();
        let a =
            concat_features("d", &[0.1, 0.2], EmbeddingSource::Table { dim: 2 }, "d", &m).unwrap();
        let b =
            concat_features("d", &[0.6, 0.8], EmbeddingSource::Tfidf { dim: 2 }, "d", &m).unwrap();
        assert_eq!(a.manual(), b.manual());
        assert_ne!(a.embedding(), b.embedding());
    }
}
