//! Weighted soft voting over the three base learners of each label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Decision, Document, LabelSchema, NerSpan};
use crate::doclevel_clf::{doc_class_probs, DocClfModel};
use crate::error::{Error, Result};
use crate::features::{extract_parts, FeatureRecipe, FeatureSpace, LabelConfig, TfidfModel};
use crate::learners::{GbdtModel, LinearModel};
use crate::sparse::SparseVec;

/// Voting weights of logistic regression, SVM and GBDT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeights {
    pub lr: f64,
    pub svm: f64,
    pub gbdt: f64,
}

impl Default for ComponentWeights {
    fn default() -> Self {
        ComponentWeights::new(1.0, 1.0, 1.0)
    }
}

impl ComponentWeights {
    pub const fn new(lr: f64, svm: f64, gbdt: f64) -> Self {
        ComponentWeights { lr, svm, gbdt }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lr, self.svm, self.gbdt]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ComponentWeights::new(self.lr * factor, self.svm * factor, self.gbdt * factor)
    }

    pub fn total(&self) -> f64 {
        self.lr + self.svm + self.gbdt
    }

    /// Finite, non-negative, and not all zero.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(format!("weights {w:?} must be finite and >= 0"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err("at least one weight must be positive".into());
        }
        Ok(())
    }
}

/// `(score_met, score_not_met)` for the member probabilities `p = P(met)`
/// ordered as logistic regression, SVM, GBDT.
pub fn weighted_scores(weights: &ComponentWeights, p: [f64; 3]) -> (f64, f64) {
    let mut met = 0.0;
    let mut not_met = 0.0;
    for (w, p) in weights.as_array().iter().zip(p) {
        met += w * p;
        not_met += w * (1.0 - p);
    }
    (met, not_met)
}

/// Argmax of the two scores; an exact tie is `not met`.
pub fn decide(scores: (f64, f64)) -> Decision {
    Decision::from_bool(scores.0 > scores.1)
}

/// Everything needed to classify one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEnsemble {
    pub label_config: LabelConfig,
    pub feature_space: FeatureSpace,
    pub logreg: LinearModel,
    pub svm: LinearModel,
    pub gbdt: GbdtModel,
    pub weights: ComponentWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_clf: Option<DocClfModel>,
}

impl LabelEnsemble {
    pub fn label(&self) -> &str {
        &self.label_config.label
    }

    pub fn member_probs(&self, x: &SparseVec) -> [f64; 3] {
        [
            self.logreg.predict_proba(x),
            self.svm.predict_proba(x),
            self.gbdt.predict_proba(x),
        ]
    }
}

pub fn ensemble_scores(entry: &LabelEnsemble, x: &SparseVec) -> (f64, f64) {
    weighted_scores(&entry.weights, entry.member_probs(x))
}

/// One entry per schema label, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub labels: Vec<LabelEnsemble>,
}

impl EnsembleModel {
    /// The label schema the entries were trained with.
    pub fn schema(&self) -> LabelSchema {
        LabelSchema {
            label_count: self.labels.len(),
            labels: self.labels.iter().map(|e| e.label_config.clone()).collect(),
        }
    }

    /// Checks the entries against `schema`: same labels, in order.
    pub fn check_complete(&self, schema: &LabelSchema) -> Result<()> {
        let have: Vec<&str> = self.labels.iter().map(|e| e.label()).collect();
        for name in schema.labels.iter().map(|l| l.label.as_str()) {
            if !have.contains(&name) {
                return Err(Error::ModelFile(format!(
                    "no ensemble entry for label `{name}`"
                )));
            }
        }
        if have.len() != schema.labels.len() {
            return Err(Error::ModelFile(format!(
                "{} ensemble entries for {} schema labels",
                have.len(),
                schema.labels.len()
            )));
        }
        for e in &self.labels {
            e.weights
                .validate()
                .map_err(|m| Error::ModelFile(format!("label `{}`: {m}", e.label())))?;
        }
        Ok(())
    }

    /// Resolves feature recipes once for repeated prediction.
    pub fn predictor<'a>(&'a self, tfidf: &'a TfidfModel) -> Result<Predictor<'a>> {
        let schema = self.schema();
        let recipes = self
            .labels
            .iter()
            .map(|e| FeatureRecipe::from_schema(&schema, e.label()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Predictor {
            model: self,
            tfidf,
            recipes,
        })
    }
}

/// An [`EnsembleModel`] with its recipes resolved.
pub struct Predictor<'a> {
    model: &'a EnsembleModel,
    tfidf: &'a TfidfModel,
    recipes: Vec<FeatureRecipe>,
}

impl Predictor<'_> {
    /// The encoded feature vector of `doc` for label entry `i`.
    pub fn features(&self, i: usize, doc: &Document, spans: &[NerSpan]) -> Result<SparseVec> {
        let entry = &self.model.labels[i];
        let recipe = &self.recipes[i];
        let probs = match (&entry.doc_clf, recipe.use_doc_clf) {
            (Some(m), true) => Some(doc_class_probs(m, doc)),
            _ => None,
        };
        let parts = extract_parts(doc, spans, self.tfidf, probs, recipe)?;
        Ok(parts
            .encode(&entry.feature_space)
            .combine(recipe.tfidf_weight, recipe.kw_weight))
    }

    pub fn scores(&self, doc: &Document, spans: &[NerSpan]) -> Result<Vec<(f64, f64)>> {
        (0..self.model.labels.len())
            .map(|i| {
                Ok(ensemble_scores(
                    &self.model.labels[i],
                    &self.features(i, doc, spans)?,
                ))
            })
            .collect()
    }

    pub fn predict(&self, doc: &Document, spans: &[NerSpan]) -> Result<BTreeMap<String, Decision>> {
        let scores = self.scores(doc, spans)?;
        Ok(self
            .model
            .labels
            .iter()
            .zip(scores)
            .map(|(e, s)| (e.label().to_string(), decide(s)))
            .collect())
    }
}

/// Decisions for every label of `model` on one document.
pub fn predict_all(
    model: &EnsembleModel,
    doc: &Document,
    spans: &[NerSpan],
    tfidf: &TfidfModel,
) -> Result<BTreeMap<String, Decision>> {
    model.predictor(tfidf)?.predict(doc, spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let p = [0.6, 0.7, 0.2];
        let (m, n) = weighted_scores(&ComponentWeights::new(1.0, 1.0, 1.0), p);
        assert!((m - 1.5).abs() < 1e-12 && (n - 1.5).abs() < 1e-12);
        let (m, n) = weighted_scores(&ComponentWeights::new(2.0, 1.0, 1.0), p);
        assert!((m - 2.1).abs() < 1e-12 && (n - 1.9).abs() < 1e-12);
        assert_eq!(
            weighted_scores(&ComponentWeights::new(1.0, 0.0, 0.0), p),
            (0.6, 1.0 - 0.6)
        );
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide((2.1, 1.9)), Decision::Met);
        assert_eq!(decide((1.5, 1.5)), Decision::NotMet);
        assert_eq!(decide((0.0, 3.0)), Decision::NotMet);
    }

    #[test]
    fn weights_validation() {
        assert!(ComponentWeights::new(0.0, 0.0, 0.0).validate().is_err());
        assert!(ComponentWeights::new(-1.0, 1.0, 0.0).validate().is_err());
        assert!(ComponentWeights::new(f64::NAN, 1.0, 0.0)
            .validate()
            .is_err());
        assert!(ComponentWeights::new(0.0, 0.5, 0.0).validate().is_ok());
    }
}
