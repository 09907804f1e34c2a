mod common;

use std::path::Path;

use cohortsel::cli::PipelineConfig;
use cohortsel::corpus::{generate_synthetic, Decision, Document, LabelSchema};
use cohortsel::ensemble::ComponentWeights;
use cohortsel::learners::{train_logreg, LogregParams};
use cohortsel::pipeline::{predict_corpus, train_model, Hyperparams};
use cohortsel::sparse::SparseVec;
use cohortsel::tuner_eval::{grid_search_weights, FeatureWeights, TuneGrid};

fn small_split(n: usize, seed: u64) -> (common::Part, common::Part) {
    let syn = generate_synthetic(seed, n, &LabelSchema::default_schema()).unwrap();
    common::split(&syn, n * 4 / 5)
}

#[test]
fn shipped_config_describes_the_builtin_schema() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/config.json");
    let mut cfg = PipelineConfig::load(&path).unwrap();
    for l in &mut cfg.schema.labels {
        for g in &mut l.gazetteers {
            assert!(g.file.is_some());
            g.file = None;
        }
    }
    assert_eq!(cfg.schema, LabelSchema::default_schema());
    let defaults = PipelineConfig::with_seed(42);
    assert_eq!(cfg.hyperparameters, defaults.hyperparameters);
    assert_eq!(cfg.component_weights, defaults.component_weights);
}

#[test]
fn synthetic_positive_rates_stay_moderate() {
    let schema = LabelSchema::default_schema();
    let syn = generate_synthetic(42, 500, &schema).unwrap();
    for l in schema.names() {
        let met = syn.gold.values().filter(|m| m[&l].is_met()).count();
        let rate = met as f64 / 500.0;
        assert!((0.3..=0.7).contains(&rate), "{l}: {rate}");
    }
}

#[test]
fn lr_only_ensemble_matches_standalone_lr() {
    let (train, test) = small_split(200, 5);
    let model = train_model(
        &LabelSchema::default_schema(),
        &train.docs,
        &train.spans,
        &train.gold,
        ComponentWeights::new(1.0, 0.0, 0.0),
        &Hyperparams::default(),
        5,
    )
    .unwrap();
    let pred = predict_corpus(&model, &test.docs, &test.spans).unwrap();
    let predictor = model.ensemble.predictor(&model.tfidf).unwrap();
    let mut compared = 0;
    for (d, spans) in test.docs.iter().zip(&test.spans) {
        for (i, entry) in model.ensemble.labels.iter().enumerate() {
            let x = predictor.features(i, d, spans).unwrap();
            let standalone = Decision::from_bool(entry.logreg.predict_proba(&x) > 0.5);
            assert_eq!(pred[&d.id][entry.label()], standalone);
            compared += 1;
        }
    }
    assert_eq!(compared, test.docs.len() * 13);
}

#[test]
fn thirteen_decisions_and_identical_documents_agree() {
    let (train, test) = small_split(120, 8);
    let model = train_model(
        &LabelSchema::default_schema(),
        &train.docs,
        &train.spans,
        &train.gold,
        ComponentWeights::default(),
        &Hyperparams::default(),
        8,
    )
    .unwrap();
    let original = &test.docs[0];
    let twin = Document::new("twin", original.text.clone());
    let twin_spans: Vec<_> = test.spans[0]
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.doc_id = "twin".into();
            s
        })
        .collect();
    let docs = vec![original.clone(), twin];
    let pred = predict_corpus(&model, &docs, &[test.spans[0].clone(), twin_spans]).unwrap();
    assert_eq!(pred[&original.id].len(), 13);
    assert_eq!(pred[&original.id], pred["twin"]);
}

#[test]
fn single_candidate_grid_returns_it() {
    let (train, _) = small_split(60, 2);
    let grid = TuneGrid {
        components: vec![ComponentWeights::new(0.5, 1.0, 2.0)],
        features: vec![FeatureWeights {
            tfidf_weight: 2.0,
            kw_weight: 0.5,
        }],
    };
    let r = grid_search_weights(
        &LabelSchema::default_schema(),
        &train.docs,
        &train.spans,
        &train.gold,
        &grid,
        5,
        2,
        &Hyperparams::default(),
        ComponentWeights::default(),
    )
    .unwrap();
    assert_eq!(r.component_weights, grid.components[0]);
    assert!(r.feature_weights.values().all(|f| *f == grid.features[0]));
    assert_eq!(r.report.component_search.len(), 1);
    assert_eq!(
        r.report.component_search[0].micro_f1,
        r.report.cv_eval.micro_f1
    );
    assert!(r.report.cv_eval.micro_f1 > 0.0);
}

#[test]
fn single_class_training_fold_uses_base_rate() {
    let (mut train, _) = small_split(60, 4);
    // LABEL-13 keeps one positive, so the fold holding it trains on negatives only.
    let mut first = true;
    for row in train.gold.values_mut() {
        let d = row.get_mut("LABEL-13").unwrap();
        *d = if first {
            Decision::Met
        } else {
            Decision::NotMet
        };
        first = false;
    }
    let grid = TuneGrid {
        components: vec![ComponentWeights::default()],
        features: vec![FeatureWeights {
            tfidf_weight: 1.0,
            kw_weight: 1.0,
        }],
    };
    let r = grid_search_weights(
        &LabelSchema::default_schema(),
        &train.docs,
        &train.spans,
        &train.gold,
        &grid,
        5,
        4,
        &Hyperparams::default(),
        ComponentWeights::default(),
    )
    .unwrap();
    assert_eq!(r.report.fallbacks.len(), 1);
    let fb = &r.report.fallbacks[0];
    assert_eq!((fb.label.as_str(), fb.positives), ("LABEL-13", 0));
    // the lone positive is held out against a base rate of zero
    assert_eq!(r.report.cv_eval.per_label["LABEL-13"].counts.fn_, 1);
}

#[test]
fn grid_search_is_reproducible() {
    let (train, _) = small_split(150, 42);
    let run = || {
        grid_search_weights(
            &LabelSchema::default_schema(),
            &train.docs,
            &train.spans,
            &train.gold,
            &TuneGrid::default(),
            5,
            42,
            &Hyperparams::default(),
            ComponentWeights::default(),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.component_weights, b.component_weights);
    assert_eq!(a.feature_weights, b.feature_weights);
    assert_eq!(a.report, b.report);
    assert_ne!(a.component_weights.as_array(), [0.0; 3]);
}

#[test]
fn logreg_separates_two_feature_fixture() {
    let pts = [
        ([2.0, 1.0], true),
        ([1.5, 2.0], true),
        ([3.0, 0.5], true),
        ([2.5, 2.5], true),
        ([-1.0, -2.0], false),
        ([-2.0, -0.5], false),
        ([-0.5, -1.5], false),
        ([-1.5, -1.0], false),
    ];
    let x: Vec<SparseVec> = pts.iter().map(|(v, _)| SparseVec::from_dense(v)).collect();
    let y: Vec<bool> = pts.iter().map(|(_, l)| *l).collect();
    let m = train_logreg(&x, &y, &LogregParams::default()).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert_eq!(m.predict_proba(xi) > 0.5, *yi);
    }
}
