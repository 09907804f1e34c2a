use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

/// Document frequencies over a lexicographically numbered vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfidfRepr", into = "TfidfRepr")]
pub struct TfidfModel {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct TfidfRepr {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
}

impl From<TfidfRepr> for TfidfModel {
    fn from(r: TfidfRepr) -> Self {
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TfidfModel {
            terms: r.terms,
            df: r.df,
            n_docs: r.n_docs,
            index,
        }
    }
}

impl From<TfidfModel> for TfidfRepr {
    fn from(m: TfidfModel) -> Self {
        TfidfRepr {
            terms: m.terms,
            df: m.df,
            n_docs: m.n_docs,
        }
    }
}

/// Counts document frequencies and keeps terms seen in at least `min_df` documents.
pub fn fit_tfidf(train_docs: &[Document], min_df: usize) -> Result<TfidfModel> {
    if train_docs.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit tf-idf on an empty corpus".into(),
        ));
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in train_docs {
        let distinct: HashSet<&str> = doc.surfaces().collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let min_df = min_df.max(1) as u32;
    let (terms, df): (Vec<String>, Vec<u32>) = df
        .into_iter()
        .filter(|(_, c)| *c >= min_df)
        .map(|(t, c)| (t.to_string(), c))
        .unzip();
    Ok(TfidfRepr {
        terms,
        df,
        n_docs: train_docs.len(),
    }
    .into())
}

impl TfidfModel {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocab_len(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<u32> {
        self.id(term).map(|i| self.df[i as usize])
    }

    /// Smoothed inverse document frequency `ln((1+N)/(1+df)) + 1`.
    pub fn idf(&self, id: u32) -> f64 {
        let n = self.n_docs as f64;
        ((1.0 + n) / (1.0 + self.df[id as usize] as f64)).ln() + 1.0
    }

    /// Raw tf times idf, L2-normalized; ids are vocabulary ids.
    pub fn vector(&self, doc: &Document) -> SparseVec {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for s in doc.surfaces() {
            if let Some(id) = self.id(s) {
                *tf.entry(id).or_default() += 1.0;
            }
        }
        let raw: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(id, c)| (id, c * self.idf(id)))
            .collect();
        let norm = raw.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SparseVec::new();
        }
        SparseVec::from_pairs(raw.into_iter().map(|(id, w)| (id, w / norm)).collect())
    }
}

pub fn tfidf_vector(model: &TfidfModel, doc: &Document) -> SparseVec {
    model.vector(doc)
}
