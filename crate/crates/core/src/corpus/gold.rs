use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};

/// Per-criterion outcome for one patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "met")]
    Met,
    #[serde(rename = "not met")]
    NotMet,
}

impl Decision {
    pub fn from_bool(met: bool) -> Self {
        if met {
            Decision::Met
        } else {
            Decision::NotMet
        }
    }

    pub fn is_met(self) -> bool {
        self == Decision::Met
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Met => "met",
            Decision::NotMet => "not met",
        })
    }
}

/// `doc_id → label → decision`; the shape shared by gold and prediction files.
pub type DecisionMap = BTreeMap<String, BTreeMap<String, Decision>>;

pub fn parse_gold(text: &str) -> Result<DecisionMap> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_gold(path: &Path) -> Result<DecisionMap> {
    let text = crate::util::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Checks that every corpus document carries exactly the schema's labels.
pub fn validate_decisions(map: &DecisionMap, corpus: &[Document], labels: &[String]) -> Result<()> {
    for doc in corpus {
        let row = map
            .get(&doc.id)
            .ok_or_else(|| Error::Mismatch(format!("no decisions for document `{}`", doc.id)))?;
        for label in labels {
            if !row.contains_key(label) {
                return Err(Error::Mismatch(format!(
                    "document `{}` has no decision for label `{label}`",
                    doc.id
                )));
            }
        }
        if let Some(extra) = row.keys().find(|k| !labels.contains(k)) {
            return Err(Error::Mismatch(format!(
                "document `{}` has decision for label `{extra}` outside the schema",
                doc.id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decisions_use_wire_names() {
        let g = parse_gold(r#"{"d1":{"HBA1C":"met","KETO-1YR":"not met"}}"#).unwrap();
        assert_eq!(g["d1"]["HBA1C"], Decision::Met);
        assert_eq!(g["d1"]["KETO-1YR"], Decision::NotMet);
        assert!(parse_gold(r#"{"d1":{"HBA1C":"not_met"}}"#).is_err());
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"{"d1":{"HBA1C":"met","KETO-1YR":"not met"}}"#
        );
    }

    #[test]
    fn validation_reports_missing_label() {
        let g = parse_gold(r#"{"d1":{"HBA1C":"met"}}"#).unwrap();
        let docs = vec![Document::new("d1", "x")];
        let labels = vec!["HBA1C".to_string(), "KETO-1YR".to_string()];
        let err = validate_decisions(&g, &docs, &labels)
            .unwrap_err()
            .to_string();
        assert!(err.contains("KETO-1YR"), "{err}");
        assert!(validate_decisions(&g, &docs, &labels[..1]).is_ok());
    }
}
