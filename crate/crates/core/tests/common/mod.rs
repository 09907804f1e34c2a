#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use cohortsel::corpus::{
    corpus_to_jsonl, write_ner_annotations, DecisionMap, Document, NerSpan, SyntheticCorpus,
};

/// One side of a train/test split of a synthetic corpus.
pub struct Part {
    pub docs: Vec<Document>,
    pub spans: Vec<Vec<NerSpan>>,
    pub gold: DecisionMap,
}

impl Part {
    pub fn write(&self, dir: &Path, stem: &str) {
        std::fs::write(
            dir.join(format!("{stem}.jsonl")),
            corpus_to_jsonl(&self.docs),
        )
        .unwrap();
        std::fs::write(
            dir.join(format!("{stem}.tsv")),
            write_ner_annotations(self.spans.iter().flatten()),
        )
        .unwrap();
        std::fs::write(
            dir.join(format!("{stem}_gold.json")),
            serde_json::to_string(&self.gold).unwrap(),
        )
        .unwrap();
    }
}

/// The first `n_train` documents train, the rest test.
pub fn split(syn: &SyntheticCorpus, n_train: usize) -> (Part, Part) {
    let by_doc: BTreeMap<String, Vec<NerSpan>> = syn.spans_by_doc();
    let part = |docs: &[Document]| Part {
        docs: docs.to_vec(),
        spans: docs
            .iter()
            .map(|d| by_doc.get(&d.id).cloned().unwrap_or_default())
            .collect(),
        gold: docs
            .iter()
            .map(|d| (d.id.clone(), syn.gold[&d.id].clone()))
            .collect(),
    };
    let (a, b) = syn.documents.split_at(n_train);
    (part(a), part(b))
}
