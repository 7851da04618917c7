//! Two-stage semi-supervised classification of marketplace documents.
//!
//! Stage 1 detects sales-related documents with a self-trained ensemble of a
//! gradient-boosted tree model, a random forest and an RBF support vector
//! machine whose votes are weighted by the entropy of their validation
//! predictions. Stage 2 runs three self-trained boosted classifiers that tag
//! detected sales as drug, weapon or credential listings.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: document model, JSONL corpus files, splits, synthetic corpora
//! - [`features`]: layout, pattern-item and metadata features
//! - [`embeddings`]: embedding tables, TF-IDF fallback, feature concatenation
//! - [`learners`]: boosted trees, random forest, SVM with Platt scaling
//! - [`voting`]: entropy statistics, ensemble weights, weighted voting
//! - [`selftrain`]: Stage 1 / Stage 2 self-training and sequential prediction
//! - [`eval`]: metrics, Friedman ranking, labeled-fraction sweeps

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod learners;
pub mod pipeline;
pub mod rng;
pub mod selftrain;
pub mod voting;

pub use error::{Error, Result};
