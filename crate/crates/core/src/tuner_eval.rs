//! Stratified cross-validation, weight grid search and micro-F1 evaluation.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Decision, DecisionMap, Document, LabelSchema, NerSpan};
use crate::ensemble::{decide, weighted_scores, ComponentWeights};
use crate::error::{Error, Result};
use crate::features::{fit_space, fit_tfidf, FeatureRecipe};
use crate::learners::GbdtModel;
use crate::pipeline::{
    fit_gbdt, fit_linear, is_single_class, label_matrix, label_seed, prepare_label, unseen_parts,
    Hyperparams,
};
use crate::sparse::SparseVec;
use crate::util::derive_seed;

/// Fold index of every example, by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, i: usize) -> usize {
        self.folds[i]
    }

    /// Example indices of fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len())
            .filter(|&i| self.folds[i] == f)
            .collect()
    }

    /// Example indices outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len())
            .filter(|&i| self.folds[i] != f)
            .collect()
    }
}

/// Positives and negatives are shuffled separately and dealt round-robin;
/// negatives continue where the positives stopped so fold sizes stay
/// balanced too.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k}, need k >= 2")));
    }
    if y.len() < k {
        return Err(Error::InvalidInput(format!(
            "{} examples for {k} folds",
            y.len()
        )));
    }
    if let Some(v) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("label {v} is not 0 or 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![0; y.len()];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        folds[i] = slot % k;
    }
    Ok(FoldAssignment { k, folds })
}

/// Confusion counts with `met` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn add(&mut self, gold: bool, pred: bool) {
        match (gold, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

impl From<Counts> for LabelMetrics {
    fn from(counts: Counts) -> Self {
        LabelMetrics {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
    pub n_docs: usize,
    pub per_label: BTreeMap<String, LabelMetrics>,
}

impl EvalReport {
    pub fn from_counts(per_label: &BTreeMap<String, Counts>, n_docs: usize) -> Self {
        let mut total = Counts::default();
        for c in per_label.values() {
            total.merge(c);
        }
        EvalReport {
            micro_p: total.precision(),
            micro_r: total.recall(),
            micro_f1: total.f1(),
            counts: total,
            n_docs,
            per_label: per_label
                .iter()
                .map(|(l, c)| (l.clone(), LabelMetrics::from(*c)))
                .collect(),
        }
    }

    /// Per-label P/R/F1 and the pooled scores, as percentages.
    pub fn table(&self) -> String {
        let width = self
            .per_label
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}",
            "label", "P", "R", "F1"
        );
        for (label, m) in &self.per_label {
            let _ = writeln!(
                out,
                "{label:<width$}  {:>7.2}  {:>7.2}  {:>7.2}",
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}",
            "micro",
            100.0 * self.micro_p,
            100.0 * self.micro_r,
            100.0 * self.micro_f1
        );
        out
    }
}

/// Pooled micro-averaged scores over every (document, label) pair.
pub fn micro_f1(gold: &DecisionMap, pred: &DecisionMap) -> Result<EvalReport> {
    let mut per_label: BTreeMap<String, Counts> = BTreeMap::new();
    for (doc, g) in gold {
        let p = pred
            .get(doc)
            .ok_or_else(|| Error::Mismatch(format!("document `{doc}` missing from predictions")))?;
        for (label, gd) in g {
            let pd = p.get(label).ok_or_else(|| {
                Error::Mismatch(format!(
                    "label `{label}` missing for document `{doc}` in predictions"
                ))
            })?;
            per_label
                .entry(label.clone())
                .or_default()
                .add(gd.is_met(), pd.is_met());
        }
        if let Some(extra) = p.keys().find(|l| !g.contains_key(*l)) {
            return Err(Error::Mismatch(format!(
                "label `{extra}` for document `{doc}` not in gold"
            )));
        }
    }
    if let Some(extra) = pred.keys().find(|d| !gold.contains_key(*d)) {
        return Err(Error::Mismatch(format!("document `{extra}` not in gold")));
    }
    Ok(EvalReport::from_counts(&per_label, gold.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeights {
    pub tfidf_weight: f64,
    pub kw_weight: f64,
}

/// Candidate sets searched by [`grid_search_weights`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub components: Vec<ComponentWeights>,
    pub features: Vec<FeatureWeights>,
}

pub const COMPONENT_LEVELS: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
pub const FEATURE_LEVELS: [f64; 3] = [0.5, 1.0, 2.0];

impl Default for TuneGrid {
    fn default() -> Self {
        let mut components = Vec::new();
        for lr in COMPONENT_LEVELS {
            for svm in COMPONENT_LEVELS {
                for gbdt in COMPONENT_LEVELS {
                    if lr + svm + gbdt > 0.0 {
                        components.push(ComponentWeights::new(lr, svm, gbdt));
                    }
                }
            }
        }
        let mut features = Vec::new();
        for tfidf_weight in FEATURE_LEVELS {
            for kw_weight in FEATURE_LEVELS {
                features.push(FeatureWeights {
                    tfidf_weight,
                    kw_weight,
                });
            }
        }
        TuneGrid {
            components,
            features,
        }
    }
}

impl TuneGrid {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::config("grid.components", "no candidates"));
        }
        if self.features.is_empty() {
            return Err(Error::config("grid.features", "no candidates"));
        }
        for (i, w) in self.components.iter().enumerate() {
            w.validate()
                .map_err(|m| Error::config(format!("grid.components[{i}]"), m))?;
        }
        for (i, f) in self.features.iter().enumerate() {
            for v in [f.tfidf_weight, f.kw_weight] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::config(
                        format!("grid.features[{i}]"),
                        "weights must be finite and >= 0",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Index of the best-scoring candidate. Ties go to the candidate nearest
/// `center` in L1, then to the lexicographically smallest.
pub fn select_candidate(candidates: &[Vec<f64>], scores: &[f64], center: &[f64]) -> usize {
    let l1 = |c: &[f64]| {
        c.iter()
            .zip(center)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    };
    let lex = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    (0..candidates.len())
        .min_by(|&i, &j| {
            scores[j]
                .total_cmp(&scores[i])
                .then(l1(&candidates[i]).total_cmp(&l1(&candidates[j])))
                .then(lex(&candidates[i], &candidates[j]))
        })
        .expect("at least one candidate")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCandidateScore {
    #[serde(flatten)]
    pub weights: FeatureWeights,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCandidateScore {
    pub weights: ComponentWeights,
    pub micro_f1: f64,
}

/// A (label, fold) whose training part held one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fallback {
    pub label: String,
    pub fold: usize,
    pub positives: usize,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub k: usize,
    pub grid: TuneGrid,
    /// Pooled out-of-fold F1 of each feature candidate, per label.
    pub feature_search: BTreeMap<String, Vec<FeatureCandidateScore>>,
    /// Pooled out-of-fold micro-F1 of each component candidate.
    pub component_search: Vec<ComponentCandidateScore>,
    pub chosen_component_weights: ComponentWeights,
    pub chosen_feature_weights: BTreeMap<String, FeatureWeights>,
    /// Out-of-fold evaluation at the chosen weights.
    pub cv_eval: EvalReport,
    pub fallbacks: Vec<Fallback>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub component_weights: ComponentWeights,
    pub feature_weights: BTreeMap<String, FeatureWeights>,
    pub report: CvReport,
}

impl TuneResult {
    /// `schema` with the tuned feature weights written into each label.
    pub fn apply_to(&self, schema: &LabelSchema) -> LabelSchema {
        let mut out = schema.clone();
        for l in &mut out.labels {
            if let Some(f) = self.feature_weights.get(&l.label) {
                l.tfidf_weight = f.tfidf_weight;
                l.kw_weight = f.kw_weight;
            }
        }
        out
    }
}

/// Held-out member probabilities of one (label, fold), per feature candidate.
struct FoldOutcome {
    held_out: Vec<usize>,
    /// `probs[c][j]` for candidate `c` and the `j`-th held-out example.
    probs: Vec<Vec<[f64; 3]>>,
    fallback: Option<Fallback>,
}

struct CvInput<'a> {
    schema: &'a LabelSchema,
    docs: &'a [Document],
    spans: &'a [Vec<NerSpan>],
    recipes: Vec<FeatureRecipe>,
    grid: &'a TuneGrid,
    hyper: &'a Hyperparams,
}

fn run_fold(
    input: &CvInput<'_>,
    label: usize,
    y: &[bool],
    folds: &FoldAssignment,
    fold: usize,
    seed: u64,
) -> Result<FoldOutcome> {
    let train = folds.complement(fold);
    let held_out = folds.members(fold);
    let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    if is_single_class(&y_train) {
        let positives = y_train.iter().filter(|&&v| v).count();
        let base = positives as f64 / y_train.len() as f64;
        return Ok(FoldOutcome {
            probs: vec![vec![[base; 3]; held_out.len()]; input.grid.features.len()],
            held_out,
            fallback: Some(Fallback {
                label: input.schema.labels[label].label.clone(),
                fold,
                positives,
                train_size: y_train.len(),
            }),
        });
    }

    let train_docs: Vec<Document> = train.iter().map(|&i| input.docs[i].clone()).collect();
    let tfidf = fit_tfidf(&train_docs, input.hyper.min_df)?;
    let recipe = &input.recipes[label];
    let refs = |idx: &[usize]| -> (Vec<&Document>, Vec<&[NerSpan]>) {
        (
            idx.iter().map(|&i| &input.docs[i]).collect(),
            idx.iter().map(|&i| input.spans[i].as_slice()).collect(),
        )
    };
    let (tr_docs, tr_spans) = refs(&train);
    let (ho_docs, ho_spans) = refs(&held_out);
    let prepared = prepare_label(
        &tr_docs,
        &tr_spans,
        &y_train,
        &tfidf,
        recipe,
        &input.hyper.doc_clf,
        seed,
    )?;
    let ho_parts = unseen_parts(
        &ho_docs,
        &ho_spans,
        &tfidf,
        recipe,
        prepared.doc_clf.as_ref(),
    )?;

    // One space with every family; a zero family weight then yields
    // all-zero columns, which no learner can use.
    let space = fit_space(&prepared.parts, 1.0, 1.0);
    let tr_enc: Vec<_> = prepared.parts.iter().map(|p| p.encode(&space)).collect();
    let ho_enc: Vec<_> = ho_parts.iter().map(|p| p.encode(&space)).collect();

    // Trees split on thresholds, so rescaling a family by a positive factor
    // leaves them unchanged; only which families are zeroed matters.
    let mut trees: BTreeMap<(bool, bool), GbdtModel> = BTreeMap::new();
    let mut probs = Vec::with_capacity(input.grid.features.len());
    for fw in &input.grid.features {
        let (tw, kw) = (fw.tfidf_weight, fw.kw_weight);
        let x: Vec<SparseVec> = tr_enc.iter().map(|p| p.combine(tw, kw)).collect();
        let key = (tw == 0.0, kw == 0.0);
        let gbdt = match trees.entry(key) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(fit_gbdt(&x, &y_train, &input.hyper.gbdt)?),
        };
        let (logreg, svm) = fit_linear(&x, &y_train, input.hyper, seed)?;
        probs.push(
            ho_enc
                .iter()
                .map(|p| {
                    let xi = p.combine(tw, kw);
                    [
                        logreg.predict_proba(&xi),
                        svm.predict_proba(&xi),
                        gbdt.predict_proba(&xi),
                    ]
                })
                .collect(),
        );
    }
    Ok(FoldOutcome {
        held_out,
        probs,
        fallback: None,
    })
}

/// Two-stage grid search on pooled out-of-fold predictions.
///
/// Stage one picks each label's (tfidf, kw) weights by that label's pooled
/// F1, voting with the `base` component weights (or the label's override).
/// Stage two picks the shared component weights by pooled micro-F1 over
/// all labels at the stage-one choices. Each label stratifies its folds
/// on its own gold column. Deterministic given `seed`.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_weights(
    schema: &LabelSchema,
    docs: &[Document],
    spans: &[Vec<NerSpan>],
    gold: &DecisionMap,
    grid: &TuneGrid,
    k: usize,
    seed: u64,
    hyper: &Hyperparams,
    base: ComponentWeights,
) -> Result<TuneResult> {
    schema.validate()?;
    grid.validate()?;
    base.validate()
        .map_err(|m| Error::config("component_weights", m))?;
    if spans.len() != docs.len() {
        return Err(Error::InvalidInput(format!(
            "{} span lists for {} documents",
            spans.len(),
            docs.len()
        )));
    }
    let y = label_matrix(schema, docs, gold)?;
    let folds = y
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let col: Vec<u8> = col.iter().map(|&v| v as u8).collect();
            stratified_kfold(&col, k, derive_seed(seed, 500 + i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let input = CvInput {
        schema,
        docs,
        spans,
        recipes: FeatureRecipe::for_schema(schema)?,
        grid,
        hyper,
    };

    let jobs: Vec<(usize, usize)> = (0..schema.labels.len())
        .flat_map(|l| (0..k).map(move |f| (l, f)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(l, f)| {
            let s = derive_seed(label_seed(seed, l), 100 + f as u64);
            run_fold(&input, l, &y[l], &folds[l], f, s)
        })
        .collect::<Result<Vec<_>>>()?;

    // pooled[l][c][doc]
    let n = docs.len();
    let n_feat = grid.features.len();
    let mut pooled = vec![vec![vec![[0.0; 3]; n]; n_feat]; schema.labels.len()];
    let mut fallbacks = Vec::new();
    for (&(l, _), out) in jobs.iter().zip(outcomes) {
        for (c, probs) in out.probs.iter().enumerate() {
            for (&doc, p) in out.held_out.iter().zip(probs) {
                pooled[l][c][doc] = *p;
            }
        }
        fallbacks.extend(out.fallback);
    }

    let label_weights: Vec<ComponentWeights> = schema
        .labels
        .iter()
        .map(|l| l.component_weights.unwrap_or(base))
        .collect();
    let counts_for = |l: usize, c: usize, w: &ComponentWeights| {
        let mut counts = Counts::default();
        for (doc, p) in pooled[l][c].iter().enumerate() {
            counts.add(y[l][doc], decide(weighted_scores(w, *p)).is_met());
        }
        counts
    };

    let feature_vecs: Vec<Vec<f64>> = grid
        .features
        .iter()
        .map(|f| vec![f.tfidf_weight, f.kw_weight])
        .collect();
    let mut feature_search = BTreeMap::new();
    let mut chosen_features = Vec::new();
    for (l, cfg) in schema.labels.iter().enumerate() {
        let scores: Vec<f64> = (0..n_feat)
            .map(|c| counts_for(l, c, &label_weights[l]).f1())
            .collect();
        let best = select_candidate(&feature_vecs, &scores, &[1.0, 1.0]);
        chosen_features.push(best);
        feature_search.insert(
            cfg.label.clone(),
            grid.features
                .iter()
                .zip(&scores)
                .map(|(w, f1)| FeatureCandidateScore {
                    weights: *w,
                    f1: *f1,
                })
                .collect(),
        );
    }

    let pooled_counts = |w: &ComponentWeights| -> BTreeMap<String, Counts> {
        schema
            .labels
            .iter()
            .enumerate()
            .map(|(l, cfg)| {
                let lw = cfg.component_weights.unwrap_or(*w);
                (cfg.label.clone(), counts_for(l, chosen_features[l], &lw))
            })
            .collect()
    };
    let component_scores: Vec<f64> = grid
        .components
        .iter()
        .map(|w| EvalReport::from_counts(&pooled_counts(w), n).micro_f1)
        .collect();
    let component_vecs: Vec<Vec<f64>> = grid
        .components
        .iter()
        .map(|w| w.as_array().to_vec())
        .collect();
    let best = select_candidate(&component_vecs, &component_scores, &[1.0, 1.0, 1.0]);
    let chosen = grid.components[best];

    let feature_weights: BTreeMap<String, FeatureWeights> = schema
        .labels
        .iter()
        .zip(&chosen_features)
        .map(|(cfg, &c)| (cfg.label.clone(), grid.features[c]))
        .collect();
    let report = CvReport {
        seed,
        k,
        grid: grid.clone(),
        feature_search,
        component_search: grid
            .components
            .iter()
            .zip(&component_scores)
            .map(|(w, s)| ComponentCandidateScore {
                weights: *w,
                micro_f1: *s,
            })
            .collect(),
        chosen_component_weights: chosen,
        chosen_feature_weights: feature_weights.clone(),
        cv_eval: EvalReport::from_counts(&pooled_counts(&chosen), n),
        fallbacks,
    };
    Ok(TuneResult {
        component_weights: chosen,
        feature_weights,
        report,
    })
}

/// Decision map from a gold label matrix (used by tests and reports).
pub fn decisions_from_matrix(
    doc_ids: &[String],
    labels: &[String],
    met: &[Vec<bool>],
) -> DecisionMap {
    doc_ids
        .iter()
        .enumerate()
        .map(|(d, id)| {
            (
                id.clone(),
                labels
                    .iter()
                    .enumerate()
                    .map(|(l, name)| (name.clone(), Decision::from_bool(met[l][d])))
                    .collect(),
            )
        })
        .collect()
}
