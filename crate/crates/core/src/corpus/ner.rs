use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{tokenize, Document, Token};
use crate::error::{Error, Result};

/// Entity category produced by the clinical NER tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NerTag {
    Problem,
    Treatment,
    Test,
}

impl NerTag {
    pub const ALL: [NerTag; 3] = [NerTag::Problem, NerTag::Treatment, NerTag::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            NerTag::Problem => "problem",
            NerTag::Treatment => "treatment",
            NerTag::Test => "test",
        }
    }
}

impl fmt::Display for NerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NerTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "problem" => Ok(NerTag::Problem),
            "treatment" => Ok(NerTag::Treatment),
            "test" => Ok(NerTag::Test),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

/// A predicted entity span in standoff form (byte offsets into the text).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NerSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub tag: NerTag,
    pub surface: String,
}

/// Parses TSV rows `doc_id, start, end, tag, surface` and checks them against
/// the corpus. Spans come back grouped per document and sorted by start.
pub fn parse_ner_annotations(
    reader: impl BufRead,
    path: &Path,
    corpus: &[Document],
) -> Result<BTreeMap<String, Vec<NerSpan>>> {
    let lengths: HashMap<&str, usize> = corpus
        .iter()
        .map(|d| (d.id.as_str(), d.text.len()))
        .collect();
    let mut out: BTreeMap<String, Vec<NerSpan>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!(
                "expected 5 tab-separated columns, found {}",
                fields.len()
            )));
        }
        let start: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("bad start offset `{}`", fields[1])))?;
        let end: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("bad end offset `{}`", fields[2])))?;
        let tag: NerTag = fields[3].parse()?;
        let doc_id = fields[0];
        let len = *lengths
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))?;
        if start >= end || end > len {
            return Err(Error::SpanOutOfBounds {
                doc_id: doc_id.to_string(),
                start,
                end,
                len,
            });
        }
        out.entry(doc_id.to_string()).or_default().push(NerSpan {
            doc_id: doc_id.to_string(),
            start,
            end,
            tag,
            surface: fields[4].to_string(),
        });
    }
    for spans in out.values_mut() {
        spans.sort_by_key(|s| (s.start, s.end));
    }
    Ok(out)
}

pub fn load_ner_annotations(
    path: &Path,
    corpus: &[Document],
) -> Result<BTreeMap<String, Vec<NerSpan>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ner_annotations(BufReader::new(file), path, corpus)
}

/// Renders spans as annotation TSV, one row per span.
pub fn write_ner_annotations<'a>(spans: impl IntoIterator<Item = &'a NerSpan>) -> String {
    let mut out = String::new();
    for s in spans {
        let surface: String = s
            .surface
            .chars()
            .map(|c| {
                if matches!(c, '\t' | '\n' | '\r') {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            s.doc_id, s.start, s.end, s.tag, surface
        ));
    }
    out
}

/// Reads a phrase list: one phrase per line, `#` comments and blank lines skipped.
pub fn load_phrase_file(path: &Path) -> Result<Vec<String>> {
    let text = crate::util::read_to_string(path)?;
    Ok(parse_phrase_list(&text))
}

pub(crate) fn parse_phrase_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Builds a surface→tag lexicon from one phrase file per tag.
pub fn load_lexicon<'a>(
    files: impl IntoIterator<Item = (NerTag, &'a Path)>,
) -> Result<BTreeMap<String, NerTag>> {
    let mut lexicon = BTreeMap::new();
    for (tag, path) in files {
        for phrase in load_phrase_file(path)? {
            lexicon.entry(phrase).or_insert(tag);
        }
    }
    Ok(lexicon)
}

/// A matched phrase covering tokens `start..end` (token indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseMatch<'a, V> {
    pub start: usize,
    pub end: usize,
    pub value: &'a V,
}

/// Longest-match, left-to-right phrase lookup over token surfaces.
#[derive(Debug, Clone)]
pub struct PhraseMatcher<V> {
    phrases: HashMap<String, V>,
    first_tokens: HashSet<String>,
    max_len: usize,
}

impl<V> Default for PhraseMatcher<V> {
    fn default() -> Self {
        PhraseMatcher {
            phrases: HashMap::new(),
            first_tokens: HashSet::new(),
            max_len: 0,
        }
    }
}

impl<V> PhraseMatcher<V> {
    /// Phrases are normalized with the document tokenizer; the first
    /// occurrence of a duplicate phrase wins.
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, V)>) -> Self {
        let mut m = PhraseMatcher::default();
        for (phrase, value) in entries {
            let toks: Vec<String> = tokenize(phrase.as_ref())
                .into_iter()
                .map(|t| t.surface)
                .collect();
            if toks.is_empty() {
                continue;
            }
            m.max_len = m.max_len.max(toks.len());
            m.first_tokens.insert(toks[0].clone());
            m.phrases.entry(toks.join(" ")).or_insert(value);
        }
        m
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    /// Non-overlapping matches in ascending token order.
    pub fn find<'a>(&'a self, tokens: &[Token]) -> Vec<PhraseMatch<'a, V>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if !self.first_tokens.contains(&tokens[i].surface) {
                i += 1;
                continue;
            }
            let longest = self.max_len.min(tokens.len() - i);
            let mut key = String::new();
            let mut best = None;
            for len in 1..=longest {
                if len > 1 {
                    key.push(' ');
                }
                key.push_str(&tokens[i + len - 1].surface);
                if let Some(v) = self.phrases.get(&key) {
                    best = Some((len, v));
                }
            }
            match best {
                Some((len, value)) => {
                    out.push(PhraseMatch {
                        start: i,
                        end: i + len,
                        value,
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

impl PhraseMatcher<()> {
    pub fn from_phrases<S: AsRef<str>>(phrases: impl IntoIterator<Item = S>) -> Self {
        PhraseMatcher::new(phrases.into_iter().map(|p| (p, ())))
    }
}

/// Fallback NER: tags every lexicon phrase found in the document.
pub fn dictionary_ner(doc: &Document, lexicon: &PhraseMatcher<NerTag>) -> Vec<NerSpan> {
    lexicon
        .find(&doc.tokens)
        .into_iter()
        .map(|m| {
            let start = doc.tokens[m.start].start;
            let end = doc.tokens[m.end - 1].end;
            NerSpan {
                doc_id: doc.id.clone(),
                start,
                end,
                tag: *m.value,
                surface: doc.text[start..end].to_string(),
            }
        })
        .collect()
}
