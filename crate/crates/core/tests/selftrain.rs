use sse_core::corpus::{
    generate_synthetic_corpus, split_labeled, Category, SplitRatios, SyntheticSpec,
};
use sse_core::embeddings::TfidfConfig;
use sse_core::learners::{ForestParams, GbdtParams, LearnerParams, LearnerSpec, SvmParams};
use sse_core::pipeline::{
    featurize, fit_tfidf_embedder, load_bundle, save_bundle, train_pipeline, CorpusPartition,
    EmbeddingState, PipelineConfig, TrainingSets,
};
use sse_core::selftrain::{train_sse, train_supervised_ensemble, SseConfig, Stage2Config};

fn small_learners(seed: u64) -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::new(
            LearnerParams::Gbdt(GbdtParams {
                n_estimators: 40,
                ..GbdtParams::sse()
            }),
            seed,
        ),
        LearnerSpec::new(
            LearnerParams::RandomForest(ForestParams {
                n_estimators: 40,
                ..ForestParams::sse()
            }),
            seed,
        ),
        LearnerSpec::new(LearnerParams::Svm(SvmParams::sse()), seed),
    ]
}

fn small_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::tuned(seed);
    cfg.sse.learners = small_learners(seed);
    cfg.sse.max_iterations = 5;
    for c in [
        &mut cfg.stage2.drug,
        &mut cfg.stage2.weapon,
        &mut cfg.stage2.credential,
    ] {
        c.max_iterations = 5;
        if let LearnerParams::Gbdt(p) = &mut c.learner.params {
            p.n_estimators = 40;
        }
    }
    cfg.tfidf = TfidfConfig { max_features: 32 };
    cfg
}

fn fixture_sets(
    seed: u64,
) -> (
    Vec<sse_core::corpus::Document>,
    sse_core::corpus::DatasetSplit,
) {
    let spec = SyntheticSpec {
        n_labeled: 160,
        n_unlabeled: 200,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic_corpus(&spec, seed)
        .unwrap()
        .all_documents();
    let split = split_labeled(&docs, SplitRatios::default(), seed).unwrap();
    (docs, split)
}

#[test]
fn empty_pool_equals_supervised_ensemble() {
    let (docs, split) = fixture_sets(2);
    let part = CorpusPartition::new(&docs, &split).unwrap();
    let emb = fit_tfidf_embedder(&part.fit_documents(), TfidfConfig { max_features: 32 }).unwrap();
    let sets = TrainingSets::build(&part, &emb).unwrap();
    let cfg = SseConfig {
        learners: small_learners(4),
        ..SseConfig::tuned(4)
    };
    let (yt, yv) = (sets.y_train_sale(), sets.y_validation_sale());
    let sse = train_sse(&sets.train, &yt, &sets.validation, &yv, &[], &cfg).unwrap();
    let sup =
        train_supervised_ensemble(&sets.train, &yt, &sets.validation, &yv, &cfg.learners).unwrap();
    assert_eq!(sse.history.len(), 1);
    assert_eq!(sse.weights, sup.weights);
    for x in sets.unlabeled.iter().chain(&sets.validation) {
        assert_eq!(sse.vote(&x.values).unwrap(), sup.vote(&x.values).unwrap());
    }
}

#[test]
fn pool_sample_joins_only_categories_over_threshold() {
    let cfg = Stage2Config::tuned(0);
    let p = [0.95, 0.2, 0.93];
    let joined: Vec<Category> = Category::ALL
        .into_iter()
        .filter(|c| cfg.get(*c).admits(p[c.index()]))
        .collect();
    assert_eq!(joined, vec![Category::Drug, Category::Credential]);
}

#[test]
fn bundle_round_trip_preserves_predictions() {
    let (docs, split) = fixture_sets(9);
    let part = CorpusPartition::new(&docs, &split).unwrap();
    let cfg = small_config(9);
    let emb = fit_tfidf_embedder(&part.fit_documents(), cfg.tfidf).unwrap();
    let sets = TrainingSets::build(&part, &emb).unwrap();
    let model = train_pipeline(&sets, &cfg, EmbeddingState::from_embedder(&emb)).unwrap();

    let dir = std::env::temp_dir().join(format!("sse-bundle-{}", std::process::id()));
    save_bundle(&dir, &model).unwrap();
    let loaded = load_bundle(&dir).unwrap();
    let reloaded_emb = loaded.embedding.embedder(None).unwrap();
    let test = featurize(part.test.iter().copied(), &emb).unwrap();
    let test_again = featurize(part.test.iter().copied(), &reloaded_emb).unwrap();
    assert_eq!(test, test_again);
    assert_eq!(
        model.predict_all(&test).unwrap(),
        loaded.predict_all(&test).unwrap()
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn history_obeys_pool_contracts() {
    let (docs, split) = fixture_sets(13);
    let part = CorpusPartition::new(&docs, &split).unwrap();
    let cfg = small_config(13);
    let emb = fit_tfidf_embedder(&part.fit_documents(), cfg.tfidf).unwrap();
    let sets = TrainingSets::build(&part, &emb).unwrap();
    let model = train_pipeline(&sets, &cfg, EmbeddingState::from_embedder(&emb)).unwrap();

    let sse_log: Vec<_> = model
        .training_log()
        .into_iter()
        .filter(|r| r.stage == "sse")
        .collect();
    assert!(!sse_log.is_empty() && sse_log.len() <= cfg.sse.max_iterations);
    let mut pool = sets.unlabeled.len();
    for rec in &sse_log {
        assert_eq!(rec.pool_remaining + rec.added, pool);
        assert_eq!(rec.additions.len(), rec.added);
        assert!(rec.additions.iter().all(|a| a.confidence >= cfg.sse.theta));
        pool = rec.pool_remaining;
    }
    for c in Category::ALL {
        let m = model.categories.get(c);
        assert!(m.history.len() <= cfg.stage2.get(c).max_iterations);
        assert!(m
            .history
            .iter()
            .flat_map(|h| &h.additions)
            .all(|a| a.label && a.confidence >= m.theta));
    }
}
