use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub max_features: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self { max_features: 5000 }
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub config: TfidfConfig,
    /// Selected terms in column order (lexicographic).
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfidfModel {
    fn new(config: TfidfConfig, terms: Vec<String>, idf: Vec<f64>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            config,
            terms,
            idf,
            index,
        }
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindexed(self) -> Self {
        Self::new(self.config, self.terms, self.idf)
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        tfidf_embed(self, text)
    }
}

/// Keeps the `max_features` terms with the highest document frequency
/// (ties broken lexicographically); idf = ln((1 + N) / (1 + df)) + 1.
pub fn tfidf_fit<S: AsRef<str>>(texts: &[S], config: TfidfConfig) -> Result<TfidfModel> {
    if texts.is_empty() {
        return Err(Error::Fit("TF-IDF needs at least one text".into()));
    }
    if config.max_features == 0 {
        return Err(Error::Config("max_features must be positive".into()));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        let mut seen: Vec<String> = tokenize(text.as_ref()).collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::Fit("all texts are empty after tokenization".into()));
    }
    let mut ranked: Vec<(&String, &usize)> = df.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(config.max_features);
    ranked.sort_by(|a, b| a.0.cmp(b.0));

    let n = texts.len() as f64;
    let terms: Vec<String> = ranked.iter().map(|(t, _)| (*t).clone()).collect();
    let idf = ranked
        .iter()
        .map(|(_, &d)| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    Ok(TfidfModel::new(config, terms, idf))
}

/// Raw term counts times idf, L2-normalized unless all zero.
pub fn tfidf_embed(model: &TfidfModel, text: &str) -> Vec<f64> {
    let mut v = vec![0.0; model.dim()];
    for tok in tokenize(text) {
        if let Some(i) = model.column(&tok) {
            v[i] += 1.0;
        }
    }
    for (x, idf) in v.iter_mut().zip(&model.idf) {
        *x *= idf;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
