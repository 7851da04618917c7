//! The run configuration file and its flag overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sse_core::corpus::SplitRatios;
use sse_core::pipeline::{EmbeddingMode, PipelineConfig};
use sse_core::Error;

fn default_seed() -> u64 {
    7
}

fn default_fractions() -> Vec<f64> {
    vec![0.05, 0.15, 0.25, 0.5, 0.75, 0.9, 1.0]
}

fn default_sweep_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationOptions {
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_sweep_seeds")]
    pub seeds: Vec<u64>,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            fractions: default_fractions(),
            seeds: default_sweep_seeds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub embedding_mode: EmbeddingMode,
    #[serde(default)]
    pub split: SplitRatios,
    /// A saved split manifest; when present it replaces the ratio-based split.
    #[serde(default)]
    pub split_file: Option<PathBuf>,
    /// Drives the split shuffle and every learner seed.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Defaults to the tuned configuration when omitted.
    #[serde(default)]
    pub pipeline: Option<PipelineConfig>,
    #[serde(default)]
    pub evaluation: EvaluationOptions,
}

/// Command-line values that replace fields of the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tfidf_max_features: Option<usize>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = sse_core::io::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config: {e}")))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.corpus = resolve(base, &cfg.corpus);
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.embeddings = cfg.embeddings.map(|p| resolve(base, &p));
        cfg.split_file = cfg.split_file.map(|p| resolve(base, &p));
        Ok(cfg)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(p) = o.corpus {
            self.corpus = p;
        }
        if let Some(p) = o.embeddings {
            self.embeddings = Some(p);
        }
        if let Some(p) = o.output_dir {
            self.output_dir = p;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.tfidf_max_features {
            let mut p = self.pipeline();
            p.tfidf.max_features = n;
            self.pipeline = Some(p);
        }
    }

    /// The pipeline configuration with every seed set to the run seed.
    pub fn pipeline(&self) -> PipelineConfig {
        self.pipeline
            .clone()
            .unwrap_or_else(|| PipelineConfig::tuned(self.seed))
            .reseeded(self.seed)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !self.corpus.is_file() {
            return Err(Error::Config(format!(
                "corpus `{}` does not exist",
                self.corpus.display()
            ))
            .into());
        }
        match (self.embedding_mode, &self.embeddings) {
            (EmbeddingMode::Table, None) => {
                return Err(Error::Config(
                    "embedding_mode `table` needs an `embeddings` file".into(),
                )
                .into())
            }
            (EmbeddingMode::Table, Some(p)) if !p.is_file() => {
                return Err(
                    Error::Config(format!("embeddings `{}` does not exist", p.display())).into(),
                )
            }
            _ => {}
        }
        if let Some(p) = &self.split_file {
            if !p.is_file() {
                return Err(
                    Error::Config(format!("split file `{}` does not exist", p.display())).into(),
                );
            }
        }
        self.split.validate()?;
        self.pipeline().validate()?;
        for flag in self.pipeline().sse.out_of_range() {
            log::warn!("stage 1 {flag} is outside the tuning grid");
        }
        for spec in &self.pipeline().sse.learners {
            for flag in spec.out_of_range() {
                log::warn!("{} {flag} is outside the tuning grid", spec.kind().as_str());
            }
        }
        Ok(())
    }
}

/// Writes a config file template with the tuned defaults.
pub fn template(corpus: &Path, output_dir: &Path, seed: u64) -> anyhow::Result<String> {
    let cfg = RunConfig {
        corpus: corpus.to_path_buf(),
        embeddings: None,
        output_dir: output_dir.to_path_buf(),
        embedding_mode: EmbeddingMode::Tfidf,
        split: SplitRatios::default(),
        split_file: None,
        seed,
        pipeline: Some(PipelineConfig::tuned(seed)),
        evaluation: EvaluationOptions::default(),
    };
    serde_json::to_string_pretty(&cfg).context("serializing config template")
}
