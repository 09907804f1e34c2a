//! Patient records, tokenization, NER standoff annotations and gold labels.

mod gold;
mod ner;
mod schema;
mod synth;

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gold::{load_gold, parse_gold, validate_decisions, Decision, DecisionMap};
pub use ner::{
    dictionary_ner, load_lexicon, load_ner_annotations, load_phrase_file, parse_ner_annotations,
    write_ner_annotations, NerSpan, NerTag, PhraseMatch, PhraseMatcher,
};
pub use schema::{LabelSchema, DEFAULT_LABEL_COUNT};
pub use synth::{generate_synthetic, SyntheticCorpus};

/// One token of a document: a maximal alphanumeric run, lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

/// A patient record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
}

#[derive(Serialize, Deserialize)]
struct RawDocument {
    id: String,
    text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            id: id.into(),
            text,
            tokens,
        }
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Canonical JSON-Lines record (`id` then `text`, no trailing newline).
    pub fn to_json_line(&self) -> String {
        let raw = RawDocument {
            id: self.id.clone(),
            text: self.text.clone(),
        };
        serde_json::to_string(&raw).expect("string fields always serialize")
    }
}

/// Splits `text` into maximal runs of Unicode letters/digits.
///
/// Offsets are UTF-8 byte offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                tokens.push(make_token(text, s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(make_token(text, s, text.len()));
    }
    tokens
}

fn make_token(text: &str, start: usize, end: usize) -> Token {
    Token {
        surface: text[start..end].to_lowercase(),
        start,
        end,
    }
}

/// Parses a JSON-Lines corpus. Blank lines are skipped.
pub fn parse_corpus(reader: impl BufRead, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId(raw.id));
        }
        docs.push(Document::new(raw.id, raw.text));
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), path)
}

/// Serializes documents as canonical JSON-Lines (LF terminated).
pub fn corpus_to_jsonl(docs: &[Document]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&d.to_json_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn tokenize_splits_on_punctuation() {
        assert_eq!(surfaces("HbA1c 8.5%"), ["hba1c", "8", "5"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            surfaces("Takes ginseng daily."),
            ["takes", "ginseng", "daily"]
        );
    }

    #[test]
    fn tokenize_offsets_slice_back_to_surface() {
        let text = "Creatinine: 2.1 mg/dL";
        let toks = tokenize(text);
        let expected = [
            ("creatinine", 0, 10),
            ("2", 12, 13),
            ("1", 14, 15),
            ("mg", 16, 18),
            ("dl", 19, 21),
        ];
        assert_eq!(toks.len(), expected.len());
        for (t, (s, a, b)) in toks.iter().zip(expected) {
            assert_eq!((t.surface.as_str(), t.start, t.end), (s, a, b));
            assert_eq!(text[t.start..t.end].to_lowercase(), t.surface);
        }
    }

    #[test]
    fn tokenize_uses_byte_offsets_for_multibyte_text() {
        let text = "Ölbad für Müller";
        let toks = tokenize(text);
        assert_eq!(toks[0].surface, "ölbad");
        assert_eq!(toks[0].end, "Ölbad".len());
        assert_eq!(&text[toks[2].start..toks[2].end], "Müller");
    }

    #[test]
    fn corpus_parsing() {
        let p = Path::new("mem.jsonl");
        let docs =
            parse_corpus(r#"{"id":"d1","text":"Takes ginseng daily."}"#.as_bytes(), p).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].tokens.len(), 3);

        assert!(parse_corpus("".as_bytes(), p).unwrap().is_empty());

        let dup = "{\"id\":\"d1\",\"text\":\"a\"}\n{\"id\":\"d1\",\"text\":\"b\"}\n";
        match parse_corpus(dup.as_bytes(), p) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "d1"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }

        let bad = "{\"id\":\"d1\",\"text\":\"a\"}\nnot json\n";
        match parse_corpus(bad.as_bytes(), p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn corpus_reserializes_byte_identical() {
        let src =
            "{\"id\":\"a\",\"text\":\"x \\\"q\\\" \\u0001 é\"}\n{\"id\":\"b\",\"text\":\"\"}\n";
        let docs = parse_corpus(src.as_bytes(), Path::new("m")).unwrap();
        let once = corpus_to_jsonl(&docs);
        let again = corpus_to_jsonl(&parse_corpus(once.as_bytes(), Path::new("m")).unwrap());
        assert_eq!(once, again);
    }
}
