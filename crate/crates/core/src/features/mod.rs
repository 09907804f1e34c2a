//! Per-label sparse features: TF-IDF, NER keywords and tags, gazetteer and
//! trigger-word context windows, and document-classifier probabilities.
//!
//! Every family writes into its own name prefix (`tfidf:`, `kw:`, `tag:`,
//! `gaz:`, `ctx:`, `dlc:`), so families can be summed without collisions.

mod config;
mod space;
mod tfidf;

use std::collections::BTreeMap;

pub use config::{GazetteerSpec, LabelConfig, TriggerSpec, DEFAULT_FAMILY_WEIGHT, DEFAULT_WINDOW};
pub use space::FeatureSpace;
pub use tfidf::{fit_tfidf, tfidf_vector, TfidfModel};

use crate::corpus::{Document, LabelSchema, NerSpan, PhraseMatcher};
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

pub const FAMILIES: [&str; 6] = ["tfidf", "kw", "tag", "gaz", "ctx", "dlc"];

/// Sparse vector keyed by feature name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NamedVec(BTreeMap<String, f64>);

impl NamedVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, w: f64) {
        if w == 0.0 {
            return;
        }
        let name = name.into();
        let slot = self.0.entry(name.clone()).or_insert(0.0);
        *slot += w;
        if *slot == 0.0 {
            self.0.remove(&name);
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &NamedVec, factor: f64) {
        if factor == 0.0 {
            return;
        }
        for (k, v) in other.iter() {
            self.add(k, factor * v);
        }
    }
}

/// One window-feature source: a phrase matcher and its window/weight.
#[derive(Debug, Clone)]
pub struct WindowSource {
    /// Gazetteer name (`gaz:`) or owning label (`ctx:`).
    pub key: String,
    pub matcher: PhraseMatcher<()>,
    pub window: usize,
    pub weight: f64,
}

/// A label's feature configuration with gazetteers and imports resolved.
#[derive(Debug, Clone)]
pub struct FeatureRecipe {
    pub label: String,
    pub tfidf_weight: f64,
    pub kw_weight: f64,
    pub gazetteers: Vec<WindowSource>,
    pub contexts: Vec<WindowSource>,
    pub use_doc_clf: bool,
}

fn trigger_sources(cfg: &LabelConfig) -> impl Iterator<Item = WindowSource> + '_ {
    cfg.triggers.iter().map(move |t| WindowSource {
        key: cfg.label.clone(),
        matcher: PhraseMatcher::from_phrases(&t.words),
        window: t.window,
        weight: t.weight,
    })
}

impl FeatureRecipe {
    pub fn from_schema(schema: &LabelSchema, label: &str) -> Result<Self> {
        let cfg = schema
            .get(label)
            .ok_or_else(|| Error::config("schema.labels", format!("no label `{label}`")))?;
        let gazetteers = cfg
            .gazetteers
            .iter()
            .map(|g| WindowSource {
                key: g.name.clone(),
                matcher: PhraseMatcher::from_phrases(&g.phrases),
                window: g.window,
                weight: g.weight,
            })
            .collect();
        let mut contexts: Vec<WindowSource> = trigger_sources(cfg).collect();
        for imp in &cfg.imports {
            let other = schema.get(imp).ok_or_else(|| {
                Error::config(format!("{label}.imports"), format!("unknown label `{imp}`"))
            })?;
            contexts.extend(trigger_sources(other));
        }
        Ok(FeatureRecipe {
            label: cfg.label.clone(),
            tfidf_weight: cfg.tfidf_weight,
            kw_weight: cfg.kw_weight,
            gazetteers,
            contexts,
            use_doc_clf: cfg.use_doc_clf,
        })
    }

    pub fn for_schema(schema: &LabelSchema) -> Result<Vec<Self>> {
        schema
            .labels
            .iter()
            .map(|l| Self::from_schema(schema, &l.label))
            .collect()
    }
}

/// TF-IDF weights under `tfidf:<term>` names.
pub fn tfidf_named(model: &TfidfModel, doc: &Document) -> NamedVec {
    let mut out = NamedVec::new();
    for (id, w) in model.vector(doc).iter() {
        out.add(format!("tfidf:{}", model.term(id)), w);
    }
    out
}

/// `kw:<surface>` for every token inside a span, `tag:<tag>` counts per span.
pub fn ner_keyword_features(doc: &Document, spans: &[NerSpan], kw_weight: f64) -> Result<NamedVec> {
    let mut out = NamedVec::new();
    for s in spans {
        if s.start >= s.end || s.end > doc.text.len() {
            return Err(Error::SpanOutOfBounds {
                doc_id: doc.id.clone(),
                start: s.start,
                end: s.end,
                len: doc.text.len(),
            });
        }
        out.add(format!("tag:{}", s.tag), 1.0);
    }
    for t in &doc.tokens {
        if spans.iter().any(|s| t.start < s.end && t.end > s.start) {
            out.add(format!("kw:{}", t.surface), kw_weight);
        }
    }
    Ok(out)
}

/// For each phrase match, every token within `window` positions on either
/// side (the match itself excluded) adds `weight` to `<prefix>:<surface>`.
fn window_features(
    doc: &Document,
    matcher: &PhraseMatcher<()>,
    window: usize,
    weight: f64,
    prefix: &str,
) -> NamedVec {
    let mut out = NamedVec::new();
    let n = doc.tokens.len();
    for m in matcher.find(&doc.tokens) {
        let left = m.start.saturating_sub(window)..m.start;
        let right = m.end..(m.end + window).min(n);
        for i in left.chain(right) {
            out.add(format!("{prefix}:{}", doc.tokens[i].surface), weight);
        }
    }
    out
}

pub fn gazetteer_features(
    doc: &Document,
    name: &str,
    gazetteer: &PhraseMatcher<()>,
    window: usize,
    weight: f64,
) -> NamedVec {
    window_features(doc, gazetteer, window, weight, &format!("gaz:{name}"))
}

pub fn context_features(
    doc: &Document,
    owner: &str,
    triggers: &PhraseMatcher<()>,
    window: usize,
    weight: f64,
) -> NamedVec {
    window_features(doc, triggers, window, weight, &format!("ctx:{owner}"))
}

/// Feature families split by how the per-label weights apply to them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyParts<V> {
    /// Unit-weight TF-IDF; scaled by `tfidf_weight`.
    pub tfidf: V,
    /// Keyword features at `kw_weight = 1`; scaled by `kw_weight`.
    pub keywords: V,
    /// Tags, gazetteer and context windows, doc-classifier probabilities.
    pub fixed: V,
}

pub fn extract_parts(
    doc: &Document,
    spans: &[NerSpan],
    tfidf: &TfidfModel,
    doc_clf_probs: Option<(f64, f64)>,
    recipe: &FeatureRecipe,
) -> Result<FamilyParts<NamedVec>> {
    let mut keywords = NamedVec::new();
    let mut fixed = NamedVec::new();
    for (name, w) in ner_keyword_features(doc, spans, 1.0)?.iter() {
        if name.starts_with("tag:") {
            fixed.add(name, w);
        } else {
            keywords.add(name, w);
        }
    }
    for g in &recipe.gazetteers {
        fixed.add_scaled(
            &gazetteer_features(doc, &g.key, &g.matcher, g.window, g.weight),
            1.0,
        );
    }
    for c in &recipe.contexts {
        fixed.add_scaled(
            &context_features(doc, &c.key, &c.matcher, c.window, c.weight),
            1.0,
        );
    }
    if recipe.use_doc_clf {
        if let Some((met, not_met)) = doc_clf_probs {
            fixed.add("dlc:met", met);
            fixed.add("dlc:not_met", not_met);
        }
    }
    Ok(FamilyParts {
        tfidf: tfidf_named(tfidf, doc),
        keywords,
        fixed,
    })
}

impl FamilyParts<NamedVec> {
    pub fn combine(&self, tfidf_weight: f64, kw_weight: f64) -> NamedVec {
        let mut out = self.fixed.clone();
        out.add_scaled(&self.tfidf, tfidf_weight);
        out.add_scaled(&self.keywords, kw_weight);
        out
    }

    pub fn encode(&self, space: &FeatureSpace) -> FamilyParts<SparseVec> {
        FamilyParts {
            tfidf: space.transform(&self.tfidf),
            keywords: space.transform(&self.keywords),
            fixed: space.transform(&self.fixed),
        }
    }
}

impl FamilyParts<SparseVec> {
    pub fn combine(&self, tfidf_weight: f64, kw_weight: f64) -> SparseVec {
        self.fixed
            .add_scaled(&self.tfidf, tfidf_weight)
            .add_scaled(&self.keywords, kw_weight)
    }
}

/// Fits a label's feature space on the families that carry non-zero weight.
pub fn fit_space(
    parts: &[FamilyParts<NamedVec>],
    tfidf_weight: f64,
    kw_weight: f64,
) -> FeatureSpace {
    let vecs = parts.iter().flat_map(|p| {
        let mut v = vec![&p.fixed];
        if tfidf_weight != 0.0 {
            v.push(&p.tfidf);
        }
        if kw_weight != 0.0 {
            v.push(&p.keywords);
        }
        v
    });
    FeatureSpace::fit(vecs)
}

/// The full weighted feature vector for one label and document.
pub fn assemble(
    doc: &Document,
    spans: &[NerSpan],
    tfidf: &TfidfModel,
    doc_clf_probs: Option<(f64, f64)>,
    recipe: &FeatureRecipe,
) -> Result<NamedVec> {
    Ok(extract_parts(doc, spans, tfidf, doc_clf_probs, recipe)?
        .combine(recipe.tfidf_weight, recipe.kw_weight))
}
