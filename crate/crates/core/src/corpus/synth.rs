//! Deterministic synthetic patient records with planted criterion cues.
//!
//! Every label owns a pool of cue phrases (its gazetteer entries and trigger
//! words, or generated marker phrases when it has neither). A document that
//! meets a label gets up to three cue mentions, each planted with
//! probability 0.9 in an affirming sentence; a document that does not meet
//! it gets mentions with probability 0.1, phrased as negated findings.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    corpus_to_jsonl, write_ner_annotations, Decision, DecisionMap, Document, LabelSchema, NerSpan,
    NerTag,
};
use crate::error::{Error, Result};

pub const MIN_DOCS: usize = 10;
const CUE_SLOTS: usize = 3;
const P_CUE_MET: f64 = 0.9;
const P_CUE_NOT_MET: f64 = 0.1;

const FILLER: &[&str] = &[
    "patient seen in clinic today for routine follow up",
    "vital signs reviewed and stable",
    "blood pressure {n} over {m}",
    "weight is {n} kg",
    "lives at home with spouse",
    "walks {n} blocks without difficulty",
    "sleeps well at night",
    "appetite is good",
    "return visit scheduled in {n} weeks",
    "discussed diet and exercise",
    "lungs clear to auscultation",
    "heart sounds regular",
    "abdomen soft and nontender",
    "extremities without edema",
    "skin warm and dry",
    "alert and oriented",
    "retired teacher who enjoys gardening",
    "former smoker quit {n} years ago",
    "drinks alcohol socially",
    "influenza vaccine given this season",
    "eye exam due next month",
    "foot exam performed today",
    "patient understands the plan",
    "family history reviewed",
    "temperature {n} point {m}",
    "pulse {n} and regular",
    "comfortable in the exam room",
    "accompanied by daughter",
    "works part time as a driver",
    "medication list reconciled",
];

fn templates(tag: NerTag, met: bool) -> &'static [&'static str] {
    match (tag, met) {
        (NerTag::Treatment, true) => &[
            "takes {cue} daily",
            "started on {cue} last month",
            "continues {cue} at home",
            "reports using {cue} regularly",
        ],
        (NerTag::Treatment, false) => &[
            "stopped {cue} years ago",
            "declined {cue}",
            "allergic to {cue}",
            "not taking {cue}",
        ],
        (NerTag::Problem, true) => &[
            "history of {cue}",
            "diagnosed with {cue}",
            "known {cue} on follow up",
            "admitted for {cue}",
        ],
        (NerTag::Problem, false) => &[
            "denies {cue}",
            "no evidence of {cue}",
            "{cue} was ruled out",
            "negative for {cue}",
        ],
        (NerTag::Test, true) => &[
            "{cue} elevated at {num}",
            "abnormal {cue} of {num}",
            "{cue} high at {num}",
            "{cue} rising to {num}",
        ],
        (NerTag::Test, false) => &[
            "{cue} normal at {num}",
            "{cue} within range at {num}",
            "stable {cue} of {num}",
            "{cue} unremarkable at {num}",
        ],
    }
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub annotations: Vec<NerSpan>,
    pub gold: DecisionMap,
}

impl SyntheticCorpus {
    pub fn corpus_jsonl(&self) -> String {
        corpus_to_jsonl(&self.documents)
    }

    pub fn annotations_tsv(&self) -> String {
        write_ner_annotations(&self.annotations)
    }

    pub fn gold_json(&self) -> String {
        crate::util::to_canonical_json(&self.gold).expect("decision maps always serialize")
    }

    /// Annotations grouped per document, as the loaders return them.
    pub fn spans_by_doc(&self) -> BTreeMap<String, Vec<NerSpan>> {
        let mut out: BTreeMap<String, Vec<NerSpan>> = BTreeMap::new();
        for s in &self.annotations {
            out.entry(s.doc_id.clone()).or_default().push(s.clone());
        }
        out
    }
}

fn cue_pool(schema: &LabelSchema, index: usize) -> Vec<(String, NerTag)> {
    let cfg = &schema.labels[index];
    let mut pool = Vec::new();
    for g in &cfg.gazetteers {
        let tag = g.tag.unwrap_or(NerTag::Problem);
        pool.extend(g.phrases.iter().map(|p| (p.clone(), tag)));
    }
    for t in &cfg.triggers {
        let tag = t.tag.unwrap_or(NerTag::Problem);
        pool.extend(t.words.iter().map(|w| (w.to_lowercase(), tag)));
    }
    if pool.is_empty() {
        let stem: String = cfg
            .label
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        let tag = NerTag::ALL[index % NerTag::ALL.len()];
        pool = ["alpha", "beta", "gamma", "delta"]
            .iter()
            .map(|w| (format!("{stem} {w}"), tag))
            .collect();
    }
    pool
}

fn base_rate(index: usize, count: usize) -> f64 {
    if count <= 1 {
        0.5
    } else {
        0.35 + 0.30 * index as f64 / (count - 1) as f64
    }
}

struct Sentence {
    text: String,
    cue: Option<(usize, usize, NerTag)>,
}

fn fill_numbers(template: &str, rng: &mut ChaCha8Rng) -> String {
    let mut s = template.to_string();
    while let Some(pos) = s.find("{num}") {
        let v = format!("{}.{}", rng.gen_range(1..15), rng.gen_range(0..10));
        s.replace_range(pos..pos + 5, &v);
    }
    for slot in ["{n}", "{m}"] {
        while let Some(pos) = s.find(slot) {
            let v = rng.gen_range(2..120).to_string();
            s.replace_range(pos..pos + slot.len(), &v);
        }
    }
    s
}

fn capitalize(mut s: String) -> String {
    if let Some(c) = s.chars().next() {
        let upper: String = c.to_uppercase().collect();
        s.replace_range(0..c.len_utf8(), &upper);
    }
    s.push('.');
    s
}

fn cue_sentence(template: &str, cue: &str, tag: NerTag, rng: &mut ChaCha8Rng) -> Sentence {
    let (before, after) = template
        .split_once("{cue}")
        .expect("cue templates carry a {cue} slot");
    let before = fill_numbers(before, rng);
    let after = fill_numbers(after, rng);
    let start = before.len();
    let text = capitalize(format!("{before}{cue}{after}"));
    Sentence {
        text,
        cue: Some((start, start + cue.len(), tag)),
    }
}

/// Generates `n_docs` records with gold decisions and NER annotations for
/// every label in `schema`. Pure function of its arguments.
pub fn generate_synthetic(
    seed: u64,
    n_docs: usize,
    schema: &LabelSchema,
) -> Result<SyntheticCorpus> {
    if n_docs < MIN_DOCS {
        return Err(Error::InvalidInput(format!(
            "synthetic corpus needs at least {MIN_DOCS} documents, got {n_docs}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_labels = schema.labels.len();
    let pools: Vec<_> = (0..n_labels).map(|i| cue_pool(schema, i)).collect();
    let width = n_docs.to_string().len().max(4);

    let mut documents = Vec::with_capacity(n_docs);
    let mut annotations = Vec::new();
    let mut gold = DecisionMap::new();

    for d in 0..n_docs {
        let id = format!("doc{:0width$}", d + 1);
        let mut sentences = Vec::new();
        let mut row = BTreeMap::new();
        for (li, label) in schema.labels.iter().enumerate() {
            let met = rng.gen_bool(base_rate(li, n_labels));
            row.insert(label.label.clone(), Decision::from_bool(met));
            let p = if met { P_CUE_MET } else { P_CUE_NOT_MET };
            for _ in 0..CUE_SLOTS {
                if !rng.gen_bool(p) {
                    continue;
                }
                let (cue, tag) = &pools[li][rng.gen_range(0..pools[li].len())];
                let options = templates(*tag, met);
                let template = options[rng.gen_range(0..options.len())];
                sentences.push(cue_sentence(template, cue, *tag, &mut rng));
            }
        }
        for _ in 0..rng.gen_range(3..=6) {
            let t = FILLER[rng.gen_range(0..FILLER.len())];
            sentences.push(Sentence {
                text: capitalize(fill_numbers(t, &mut rng)),
                cue: None,
            });
        }
        sentences.shuffle(&mut rng);

        let mut text = String::new();
        for s in sentences {
            if !text.is_empty() {
                text.push(' ');
            }
            let offset = text.len();
            text.push_str(&s.text);
            if let Some((a, b, tag)) = s.cue {
                annotations.push(NerSpan {
                    doc_id: id.clone(),
                    start: offset + a,
                    end: offset + b,
                    tag,
                    surface: text[offset + a..offset + b].to_string(),
                });
            }
        }
        gold.insert(id.clone(), row);
        documents.push(Document::new(id, text));
    }
    Ok(SyntheticCorpus {
        documents,
        annotations,
        gold,
    })
}
