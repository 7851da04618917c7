use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sse_core::corpus::{
    generate_synthetic_corpus, read_corpus, split_labeled, write_corpus, DatasetSplit, Document,
    LabelSampling, LabelSet, SyntheticSpec,
};
use sse_core::embeddings::TfidfConfig;
use sse_core::embeddings::{load_embedding_table, Embedder, VectorRow};
use sse_core::eval::{
    evaluate_predictions, labeled_fraction_sweep, rank_score_table, sweep_csv, ScoreRow,
};
use sse_core::features::{extract_rows, rows_to_jsonl};
use sse_core::io::{to_jsonl, write_atomic};
use sse_core::pipeline::{
    featurize, fit_tfidf_embedder, load_bundle, save_bundle, train_pipeline, training_log_jsonl,
    CorpusPartition, EmbeddingMode, EmbeddingState, TrainingSets,
};
use sse_core::Error;

use crate::config::{self, Overrides, RunConfig};
use crate::lock::DirLock;
use crate::{Command, ConfigArgs};

pub fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth {
            out,
            labeled,
            unlabeled,
            seed,
            noise,
            sampling,
        } => synth(&out, labeled, unlabeled, seed, noise, &sampling),
        Command::ExtractFeatures { corpus, out } => extract_features(&corpus, &out),
        Command::FitEmbeddings {
            corpus,
            out,
            max_features,
            split,
        } => fit_embeddings(&corpus, &out, max_features, split.as_deref()),
        Command::Train { config } => train(load_config(config)?),
        Command::Predict {
            model,
            corpus,
            embeddings,
            out,
        } => predict(&model, &corpus, embeddings.as_deref(), &out),
        Command::Evaluate {
            model,
            corpus,
            embeddings,
            split,
            part,
            out,
        } => evaluate(
            &model,
            &corpus,
            embeddings.as_deref(),
            split.as_deref(),
            &part,
            out.as_deref(),
        ),
        Command::Sweep {
            config,
            fractions,
            seeds,
            out,
        } => sweep(load_config(config)?, fractions, seeds, &out),
        Command::Rank { scores, out } => rank(&scores, out.as_deref()),
        Command::InitConfig {
            corpus,
            out_dir,
            seed,
        } => {
            println!("{}", config::template(&corpus, &out_dir, seed)?);
            Ok(())
        }
    }
}

fn load_config(args: ConfigArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply(Overrides {
        corpus: args.corpus,
        embeddings: args.embeddings,
        output_dir: args.out_dir,
        seed: args.seed,
        tfidf_max_features: args.max_features,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn pretty<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = sse_core::io::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())).into())
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    spec: &'a SyntheticSpec,
    seed: u64,
    n_labeled: usize,
    n_unlabeled: usize,
    n_sale_labeled: usize,
    flipped: &'a [String],
    split: DatasetSplit,
}

fn synth(
    out: &Path,
    labeled: usize,
    unlabeled: usize,
    seed: u64,
    noise: f64,
    sampling: &str,
) -> anyhow::Result<()> {
    let sampling = match sampling {
        "stratified" => LabelSampling::Stratified,
        "uniform" => LabelSampling::Uniform,
        other => {
            return Err(Error::Config(format!(
                "--sampling must be `stratified` or `uniform`, got `{other}`"
            ))
            .into())
        }
    };
    let spec = SyntheticSpec {
        n_labeled: labeled,
        n_unlabeled: unlabeled,
        noise,
        sampling,
        ..SyntheticSpec::default()
    };
    let corpus = generate_synthetic_corpus(&spec, seed)?;
    let docs = corpus.all_documents();
    let split = split_labeled(&docs, Default::default(), seed)?;
    write_corpus(out, &docs)?;

    let manifest = SynthManifest {
        spec: &spec,
        seed,
        n_labeled: corpus.labeled.len(),
        n_unlabeled: corpus.unlabeled.len(),
        n_sale_labeled: corpus
            .labeled
            .iter()
            .filter(|d| d.labels.is_some_and(|l| l.sale))
            .count(),
        flipped: &corpus.flipped,
        split,
    };
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    write_atomic(
        &out.with_file_name(format!("{stem}.manifest.json")),
        &pretty(&manifest)?,
    )?;
    log::info!("wrote {} documents to {}", docs.len(), out.display());
    Ok(())
}

fn extract_features(corpus: &Path, out: &Path) -> anyhow::Result<()> {
    let docs = read_corpus(corpus)?;
    let text = rows_to_jsonl(&extract_rows(&docs))?;
    write_atomic(out, text.as_bytes())?;
    Ok(())
}

fn fit_embeddings(
    corpus: &Path,
    out: &Path,
    max_features: usize,
    split: Option<&Path>,
) -> anyhow::Result<()> {
    if max_features == 0 {
        return Err(Error::Config("--max-features must be positive".into()).into());
    }
    let docs = read_corpus(corpus)?;
    let held_out: HashSet<String> = match split {
        Some(p) => read_json::<DatasetSplit>(p)?.test.into_iter().collect(),
        None => HashSet::new(),
    };
    let fit_docs: Vec<&Document> = docs.iter().filter(|d| !held_out.contains(&d.id)).collect();
    let embedder = fit_tfidf_embedder(&fit_docs, TfidfConfig { max_features })?;
    let rows = docs
        .iter()
        .map(|d| {
            Ok(VectorRow {
                id: d.id.clone(),
                vector: embedder.embed(d)?,
            })
        })
        .collect::<sse_core::Result<Vec<_>>>()?;
    write_atomic(out, &to_jsonl(&rows)?)?;
    Ok(())
}

fn dataset_split(cfg: &RunConfig, docs: &[Document]) -> anyhow::Result<DatasetSplit> {
    match &cfg.split_file {
        Some(p) => read_json(p),
        None => Ok(split_labeled(docs, cfg.split, cfg.seed)?),
    }
}

fn run_embedder(cfg: &RunConfig, part: &CorpusPartition<'_>) -> anyhow::Result<Embedder> {
    Ok(match cfg.embedding_mode {
        EmbeddingMode::Tfidf => fit_tfidf_embedder(&part.fit_documents(), cfg.pipeline().tfidf)?,
        EmbeddingMode::Table => {
            let path = cfg
                .embeddings
                .as_deref()
                .context("table mode without an embeddings path")?;
            Embedder::Table(load_embedding_table(path)?)
        }
    })
}

fn truth_of(docs: &[&Document]) -> Vec<LabelSet> {
    docs.iter().filter_map(|d| d.labels).collect()
}

fn train(cfg: RunConfig) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let docs = read_corpus(&cfg.corpus)?;
    let split = dataset_split(&cfg, &docs)?;
    let part = CorpusPartition::new(&docs, &split)?;
    let embedder = run_embedder(&cfg, &part)?;
    let sets = TrainingSets::build(&part, &embedder)?;
    log::info!(
        "training on {} labeled, {} validation, {} unlabeled documents",
        sets.train.len(),
        sets.validation.len(),
        sets.unlabeled.len()
    );
    let model = train_pipeline(
        &sets,
        &cfg.pipeline(),
        EmbeddingState::from_embedder(&embedder),
    )?;

    let out = &cfg.output_dir;
    save_bundle(&out.join("model"), &model)?;
    write_atomic(
        &out.join("training_log.jsonl"),
        &training_log_jsonl(&model)?,
    )?;
    write_atomic(&out.join("split.json"), &pretty(&split)?)?;
    write_atomic(&out.join("config.json"), &pretty(&cfg)?)?;
    if !part.test.is_empty() {
        let test = featurize(part.test.iter().copied(), &embedder)?;
        let report = evaluate_predictions(&model.predict_all(&test)?, &truth_of(&part.test))?;
        write_atomic(&out.join("test_report.json"), &pretty(&report)?)?;
        log::info!("test macro F1 {:.4}", report.macro_avg.f1);
    }
    Ok(())
}

fn bundle_embedder(
    model_dir: &Path,
    embeddings: Option<&Path>,
) -> anyhow::Result<(sse_core::pipeline::PipelineModel, Embedder)> {
    let model = load_bundle(model_dir)?;
    let table = embeddings.map(load_embedding_table).transpose()?;
    let embedder = model.embedding.embedder(table)?;
    Ok((model, embedder))
}

fn predict(
    model_dir: &Path,
    corpus: &Path,
    embeddings: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let (model, embedder) = bundle_embedder(model_dir, embeddings)?;
    let docs = read_corpus(corpus)?;
    let xs = featurize(&docs, &embedder)?;
    write_atomic(out, &to_jsonl(&model.predict_all(&xs)?)?)?;
    Ok(())
}

fn evaluate(
    model_dir: &Path,
    corpus: &Path,
    embeddings: Option<&Path>,
    split: Option<&Path>,
    part: &str,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let (model, embedder) = bundle_embedder(model_dir, embeddings)?;
    let docs = read_corpus(corpus)?;
    let selected: Vec<&Document> = match split {
        Some(p) => {
            let split: DatasetSplit = read_json(p)?;
            let ids = match part {
                "train" => split.train,
                "validation" => split.validation,
                "test" => split.test,
                other => {
                    return Err(Error::Config(format!(
                        "--part must be train, validation or test, got `{other}`"
                    ))
                    .into())
                }
            };
            let by_id: std::collections::HashMap<&str, &Document> =
                docs.iter().map(|d| (d.id.as_str(), d)).collect();
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::Join(format!("split id `{id}` is not in the corpus")))
                })
                .collect::<Result<_, _>>()?
        }
        None => docs.iter().filter(|d| d.is_labeled()).collect(),
    };
    if let Some(d) = selected.iter().find(|d| !d.is_labeled()) {
        return Err(Error::Join(format!("document `{}` has no labels", d.id)).into());
    }
    if selected.is_empty() {
        return Err(Error::Config("no labeled documents to evaluate".into()).into());
    }
    let xs = featurize(selected.iter().copied(), &embedder)?;
    let report = evaluate_predictions(&model.predict_all(&xs)?, &truth_of(&selected))?;
    let bytes = pretty(&report)?;
    match out {
        Some(p) => write_atomic(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn sweep(
    cfg: RunConfig,
    fractions: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    out: &Path,
) -> anyhow::Result<()> {
    let lock_dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let _lock = DirLock::acquire(&lock_dir)?;
    let fractions = fractions.unwrap_or_else(|| cfg.evaluation.fractions.clone());
    let seeds = seeds.unwrap_or_else(|| cfg.evaluation.seeds.clone());
    if fractions.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one fraction and one seed".into()).into());
    }

    let docs = read_corpus(&cfg.corpus)?;
    let split = dataset_split(&cfg, &docs)?;
    let part = CorpusPartition::new(&docs, &split)?;
    let embedder = run_embedder(&cfg, &part)?;
    let sets = TrainingSets::build(&part, &embedder)?;
    let test = featurize(part.test.iter().copied(), &embedder)?;
    let report = labeled_fraction_sweep(
        &sets,
        &test,
        &truth_of(&part.test),
        &fractions,
        &seeds,
        &cfg.pipeline(),
        &EmbeddingState::from_embedder(&embedder),
    )?;
    write_atomic(out, sweep_csv(&report).as_bytes())?;
    write_atomic(&out.with_extension("json"), &pretty(&report)?)?;
    Ok(())
}

fn rank(scores: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let mut reader =
        csv::Reader::from_path(scores).with_context(|| format!("reading {}", scores.display()))?;
    let rows = reader
        .deserialize::<ScoreRow>()
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("parsing {}", scores.display()))?;
    let ranking = rank_score_table(&rows)?;
    let bytes = pretty(&ranking)?;
    match out {
        Some(p) => write_atomic(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}
