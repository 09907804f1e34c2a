//! Model fitting shared by `train` and cross-validated tuning.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    dictionary_ner, DecisionMap, Document, LabelSchema, NerSpan, NerTag, PhraseMatcher,
};
use crate::doclevel_clf::{doc_class_probs, train_binary, DocClfModel, DocClfParams};
use crate::ensemble::{ComponentWeights, EnsembleModel, LabelEnsemble};
use crate::error::{Error, Result};
use crate::features::{
    extract_parts, fit_space, FamilyParts, FeatureRecipe, FeatureSpace, NamedVec, TfidfModel,
};
use crate::learners::{
    train_gbdt, train_linear_svm, train_logreg, GbdtModel, GbdtParams, LinearModel, LogregParams,
    SvmParams,
};
use crate::sparse::SparseVec;
use crate::tuner_eval::stratified_kfold;
use crate::util::derive_seed;

/// Internal folds used to produce out-of-fold doc-classifier features.
const DOC_CLF_FOLDS: usize = 3;

fn default_min_df() -> usize {
    1
}

/// Learner hyperparameters; every field defaults independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(default)]
    pub doc_clf: DocClfParams,
    #[serde(default)]
    pub logreg: LogregParams,
    #[serde(default)]
    pub svm: SvmParams,
    #[serde(default)]
    pub gbdt: GbdtParams,
    /// Terms seen in fewer training documents are dropped from TF-IDF.
    #[serde(default = "default_min_df")]
    pub min_df: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            doc_clf: DocClfParams::default(),
            logreg: LogregParams::default(),
            svm: SvmParams::default(),
            gbdt: GbdtParams::default(),
            min_df: default_min_df(),
        }
    }
}

/// Phrase → tag entries derived from the schema's gazetteers and triggers,
/// used when no entity annotations are supplied. The first tag seen wins.
pub fn schema_lexicon(schema: &LabelSchema) -> BTreeMap<String, NerTag> {
    let mut out = BTreeMap::new();
    for l in &schema.labels {
        for g in &l.gazetteers {
            if let Some(tag) = g.tag {
                for p in &g.phrases {
                    out.entry(p.clone()).or_insert(tag);
                }
            }
        }
        for t in &l.triggers {
            if let Some(tag) = t.tag {
                for w in &t.words {
                    out.entry(w.to_lowercase()).or_insert(tag);
                }
            }
        }
    }
    out
}

/// Entity spans per document, aligned with `docs`: taken from
/// `annotations` when given (documents without entries get none),
/// otherwise produced by dictionary tagging with `lexicon`.
pub fn resolve_spans(
    docs: &[Document],
    annotations: Option<&BTreeMap<String, Vec<NerSpan>>>,
    lexicon: &BTreeMap<String, NerTag>,
) -> Vec<Vec<NerSpan>> {
    match annotations {
        Some(ann) => docs
            .iter()
            .map(|d| ann.get(&d.id).cloned().unwrap_or_default())
            .collect(),
        None => {
            let matcher = PhraseMatcher::new(lexicon.iter().map(|(p, t)| (p.as_str(), *t)));
            docs.iter().map(|d| dictionary_ner(d, &matcher)).collect()
        }
    }
}

/// Gold decisions as one boolean column per schema label, aligned with `docs`.
pub fn label_matrix(
    schema: &LabelSchema,
    docs: &[Document],
    gold: &DecisionMap,
) -> Result<Vec<Vec<bool>>> {
    crate::corpus::validate_decisions(gold, docs, &schema.names())?;
    Ok(schema
        .labels
        .iter()
        .map(|l| {
            docs.iter()
                .map(|d| gold[&d.id][&l.label].is_met())
                .collect()
        })
        .collect())
}

/// Per-label seed stream.
pub(crate) fn label_seed(seed: u64, label_index: usize) -> u64 {
    derive_seed(seed, 1000 + label_index as u64)
}

pub(crate) fn is_single_class(y: &[bool]) -> bool {
    y.iter().all(|&v| v) || y.iter().all(|&v| !v)
}

/// Trains the label's doc classifier and returns it with out-of-fold
/// `(met, not met)` probabilities for each training document. Documents
/// fall back to in-sample probabilities when an internal split is
/// single-class.
fn doc_clf_with_oof(
    docs: &[&Document],
    y: &[bool],
    params: &DocClfParams,
    seed: u64,
) -> Result<(DocClfModel, Vec<(f64, f64)>)> {
    let model = train_binary(docs, y, params, derive_seed(seed, 0))?;
    let in_sample = || {
        docs.iter()
            .map(|d| doc_class_probs(&model, d))
            .collect::<Vec<_>>()
    };
    if docs.len() < DOC_CLF_FOLDS {
        let probs = in_sample();
        return Ok((model, probs));
    }
    let labels: Vec<u8> = y.iter().map(|&v| v as u8).collect();
    let folds = stratified_kfold(&labels, DOC_CLF_FOLDS, derive_seed(seed, 1))?;
    let mut probs = vec![(0.0, 0.0); docs.len()];
    for k in 0..DOC_CLF_FOLDS {
        let train: Vec<usize> = (0..docs.len()).filter(|&i| folds.fold_of(i) != k).collect();
        let ys: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        if is_single_class(&ys) {
            let probs = in_sample();
            return Ok((model, probs));
        }
        let ds: Vec<&Document> = train.iter().map(|&i| docs[i]).collect();
        let sub = train_binary(&ds, &ys, params, derive_seed(seed, 2 + k as u64))?;
        for i in (0..docs.len()).filter(|&i| folds.fold_of(i) == k) {
            probs[i] = doc_class_probs(&sub, docs[i]);
        }
    }
    Ok((model, probs))
}

/// Feature families of a label's training documents, plus the doc
/// classifier later applied to unseen documents.
pub(crate) struct PreparedLabel {
    pub doc_clf: Option<DocClfModel>,
    pub parts: Vec<FamilyParts<NamedVec>>,
}

pub(crate) fn prepare_label(
    docs: &[&Document],
    spans: &[&[NerSpan]],
    y: &[bool],
    tfidf: &TfidfModel,
    recipe: &FeatureRecipe,
    params: &DocClfParams,
    seed: u64,
) -> Result<PreparedLabel> {
    let (doc_clf, probs) = if recipe.use_doc_clf {
        let (m, p) = doc_clf_with_oof(docs, y, params, seed)?;
        (Some(m), p.into_iter().map(Some).collect())
    } else {
        (None, vec![None; docs.len()])
    };
    let parts = docs
        .iter()
        .zip(spans)
        .zip(probs)
        .map(|((d, s), p)| extract_parts(d, s, tfidf, p, recipe))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedLabel { doc_clf, parts })
}

/// Feature families of unseen documents for a label.
pub(crate) fn unseen_parts(
    docs: &[&Document],
    spans: &[&[NerSpan]],
    tfidf: &TfidfModel,
    recipe: &FeatureRecipe,
    doc_clf: Option<&DocClfModel>,
) -> Result<Vec<FamilyParts<NamedVec>>> {
    docs.iter()
        .zip(spans)
        .map(|(d, s)| {
            let p = doc_clf
                .filter(|_| recipe.use_doc_clf)
                .map(|m| doc_class_probs(m, d));
            extract_parts(d, s, tfidf, p, recipe)
        })
        .collect()
}

pub(crate) fn fit_linear(
    x: &[SparseVec],
    y: &[bool],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<(LinearModel, LinearModel)> {
    let logreg = train_logreg(x, y, &hyper.logreg)?;
    let svm = train_linear_svm(x, y, &hyper.svm, derive_seed(seed, 2))?;
    Ok((logreg, svm))
}

pub(crate) fn fit_gbdt(x: &[SparseVec], y: &[bool], params: &GbdtParams) -> Result<GbdtModel> {
    train_gbdt(x, y, params)
}

/// Fits one label's members on prepared features.
pub(crate) fn fit_members(
    prepared: PreparedLabel,
    y: &[bool],
    recipe: &FeatureRecipe,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<(
    FeatureSpace,
    Option<DocClfModel>,
    LinearModel,
    LinearModel,
    GbdtModel,
)> {
    let space = fit_space(&prepared.parts, recipe.tfidf_weight, recipe.kw_weight);
    let x: Vec<SparseVec> = prepared
        .parts
        .iter()
        .map(|p| {
            p.encode(&space)
                .combine(recipe.tfidf_weight, recipe.kw_weight)
        })
        .collect();
    let (logreg, svm) = fit_linear(&x, y, hyper, seed)?;
    let gbdt = fit_gbdt(&x, y, &hyper.gbdt)?;
    Ok((space, prepared.doc_clf, logreg, svm, gbdt))
}

/// A fitted TF-IDF model and per-label ensembles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub tfidf: TfidfModel,
    pub ensemble: EnsembleModel,
}

/// Fits every label on the full training set. Labels train in parallel
/// on the current rayon pool; results do not depend on scheduling.
pub fn train_model(
    schema: &LabelSchema,
    docs: &[Document],
    spans: &[Vec<NerSpan>],
    gold: &DecisionMap,
    weights: ComponentWeights,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    schema.validate()?;
    weights
        .validate()
        .map_err(|m| Error::config("component_weights", m))?;
    if spans.len() != docs.len() {
        return Err(Error::InvalidInput(format!(
            "{} span lists for {} documents",
            spans.len(),
            docs.len()
        )));
    }
    let y = label_matrix(schema, docs, gold)?;
    for (l, col) in schema.labels.iter().zip(&y) {
        if is_single_class(col) {
            return Err(Error::DegenerateLabels(format!(
                "label `{}` has a single class in the training data",
                l.label
            )));
        }
    }
    let tfidf = crate::features::fit_tfidf(docs, hyper.min_df)?;
    let recipes = FeatureRecipe::for_schema(schema)?;
    let doc_refs: Vec<&Document> = docs.iter().collect();
    let span_refs: Vec<&[NerSpan]> = spans.iter().map(Vec::as_slice).collect();

    let labels = (0..schema.labels.len())
        .into_par_iter()
        .map(|i| {
            let seed = label_seed(seed, i);
            let recipe = &recipes[i];
            let prepared = prepare_label(
                &doc_refs,
                &span_refs,
                &y[i],
                &tfidf,
                recipe,
                &hyper.doc_clf,
                seed,
            )?;
            let (feature_space, doc_clf, logreg, svm, gbdt) =
                fit_members(prepared, &y[i], recipe, hyper, seed)?;
            let cfg = schema.labels[i].clone();
            Ok(LabelEnsemble {
                weights: cfg.component_weights.unwrap_or(weights),
                label_config: cfg,
                feature_space,
                logreg,
                svm,
                gbdt,
                doc_clf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedModel {
        tfidf,
        ensemble: EnsembleModel { labels },
    })
}

/// Decisions for every document, keyed by document id.
pub fn predict_corpus(
    model: &TrainedModel,
    docs: &[Document],
    spans: &[Vec<NerSpan>],
) -> Result<DecisionMap> {
    let predictor = model.ensemble.predictor(&model.tfidf)?;
    let rows = docs
        .par_iter()
        .zip(spans.par_iter())
        .map(|(d, s)| Ok((d.id.clone(), predictor.predict(d, s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().collect())
}
