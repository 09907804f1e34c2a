use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ner::parse_phrase_list;
use super::NerTag;
use crate::error::{Error, Result};
use crate::features::{GazetteerSpec, LabelConfig, TriggerSpec};

pub const DEFAULT_LABEL_COUNT: usize = 13;

/// Ordered set of criteria, each with its feature recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSchema {
    #[serde(default = "default_count")]
    pub label_count: usize,
    pub labels: Vec<LabelConfig>,
}

fn default_count() -> usize {
    DEFAULT_LABEL_COUNT
}

const DIETSUPP: &str = include_str!("../../data/gazetteers/dietsupp.txt");
const CAD: &str = include_str!("../../data/gazetteers/cad.txt");
const MI: &str = include_str!("../../data/gazetteers/mi.txt");
const KETO: &str = include_str!("../../data/gazetteers/keto.txt");

/// Built-in gazetteers carry their phrases inline and no file reference.
fn builtin_gazetteer(name: &str, contents: &str, tag: NerTag) -> GazetteerSpec {
    GazetteerSpec {
        name: name.to_string(),
        file: None,
        phrases: parse_phrase_list(contents),
        window: crate::features::DEFAULT_WINDOW,
        weight: crate::features::DEFAULT_FAMILY_WEIGHT,
        tag: Some(tag),
    }
}

fn triggers(words: &[&str], tag: NerTag) -> TriggerSpec {
    TriggerSpec {
        words: words.iter().map(|w| w.to_string()).collect(),
        window: crate::features::DEFAULT_WINDOW,
        weight: crate::features::DEFAULT_FAMILY_WEIGHT,
        tag: Some(tag),
    }
}

impl LabelSchema {
    /// The demo schema: six named criteria plus seven synthetic ones.
    pub fn default_schema() -> Self {
        let mut labels = Vec::new();

        let mut cad = LabelConfig::new("ADVANCED-CAD");
        cad.gazetteers
            .push(builtin_gazetteer("cad", CAD, NerTag::Problem));
        labels.push(cad);

        let mut asp = LabelConfig::new("ASP-FOR-MI");
        asp.gazetteers
            .push(builtin_gazetteer("mi", MI, NerTag::Problem));
        asp.triggers
            .push(triggers(&["aspirin", "asa"], NerTag::Treatment));
        asp.imports.push("CREATININE".to_string());
        labels.push(asp);

        let mut creat = LabelConfig::new("CREATININE");
        creat.triggers.push(triggers(&["creatinine"], NerTag::Test));
        labels.push(creat);

        let mut diet = LabelConfig::new("DIETSUPP");
        diet.gazetteers
            .push(builtin_gazetteer("dietsupp", DIETSUPP, NerTag::Treatment));
        labels.push(diet);

        let mut hba1c = LabelConfig::new("HBA1C");
        hba1c
            .triggers
            .push(triggers(&["hba1c", "a1c"], NerTag::Test));
        labels.push(hba1c);

        let mut keto = LabelConfig::new("KETO-1YR");
        keto.gazetteers
            .push(builtin_gazetteer("keto", KETO, NerTag::Problem));
        keto.triggers
            .push(triggers(&["ketoacidosis", "dka"], NerTag::Problem));
        labels.push(keto);

        for i in 7..=DEFAULT_LABEL_COUNT {
            labels.push(LabelConfig::new(format!("LABEL-{i:02}")));
        }
        LabelSchema {
            label_count: DEFAULT_LABEL_COUNT,
            labels,
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.label.clone()).collect()
    }

    pub fn get(&self, label: &str) -> Option<&LabelConfig> {
        self.labels.iter().find(|l| l.label == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.label == label)
    }

    /// Reads every gazetteer `file` (relative to `base`) into its `phrases`.
    pub fn load_gazetteers(&mut self, base: &Path) -> Result<()> {
        for (li, label) in self.labels.iter_mut().enumerate() {
            for (gi, gaz) in label.gazetteers.iter_mut().enumerate() {
                if let Some(file) = &gaz.file {
                    let path = base.join(file);
                    let text = crate::util::read_to_string(&path).map_err(|e| {
                        Error::config(
                            format!("schema.labels[{li}].gazetteers[{gi}].file"),
                            e.to_string(),
                        )
                    })?;
                    gaz.phrases = parse_phrase_list(&text);
                }
            }
        }
        Ok(())
    }

    /// Structural checks; errors carry a path to the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.label_count {
            return Err(Error::config(
                "schema.labels",
                format!(
                    "expected {} labels, found {}",
                    self.label_count,
                    self.labels.len()
                ),
            ));
        }
        let names: HashSet<&str> = self.labels.iter().map(|l| l.label.as_str()).collect();
        if names.len() != self.labels.len() {
            return Err(Error::config("schema.labels", "label names must be unique"));
        }
        for (i, l) in self.labels.iter().enumerate() {
            let at = |f: &str| format!("schema.labels[{i}].{f}");
            let valid_name = !l.label.is_empty()
                && l.label
                    .bytes()
                    .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'-');
            if !valid_name {
                return Err(Error::config(
                    at("label"),
                    format!("`{}` must match [A-Z0-9-]+", l.label),
                ));
            }
            check_weight(l.tfidf_weight, &at("tfidf_weight"))?;
            check_weight(l.kw_weight, &at("kw_weight"))?;
            for (g, gaz) in l.gazetteers.iter().enumerate() {
                let f = at(&format!("gazetteers[{g}]"));
                if gaz.window == 0 {
                    return Err(Error::config(format!("{f}.window"), "window must be >= 1"));
                }
                check_weight(gaz.weight, &format!("{f}.weight"))?;
                if gaz.phrases.is_empty() {
                    return Err(Error::config(format!("{f}.phrases"), "gazetteer is empty"));
                }
                if gaz.name.is_empty() || gaz.name.contains(':') {
                    return Err(Error::config(
                        format!("{f}.name"),
                        "name must be non-empty without `:`",
                    ));
                }
            }
            for (t, trig) in l.triggers.iter().enumerate() {
                let f = at(&format!("triggers[{t}]"));
                if trig.window == 0 {
                    return Err(Error::config(format!("{f}.window"), "window must be >= 1"));
                }
                check_weight(trig.weight, &format!("{f}.weight"))?;
                if trig.words.is_empty() {
                    return Err(Error::config(format!("{f}.words"), "trigger set is empty"));
                }
            }
            for (m, imp) in l.imports.iter().enumerate() {
                if !names.contains(imp.as_str()) || imp == &l.label {
                    return Err(Error::config(
                        at(&format!("imports[{m}]")),
                        format!("`{imp}` is not another label of the schema"),
                    ));
                }
            }
            if let Some(w) = &l.component_weights {
                w.validate()
                    .map_err(|msg| Error::config(at("component_weights"), msg))?;
            }
        }
        Ok(())
    }
}

fn check_weight(w: f64, field: &str) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("weight {w} must be finite and >= 0"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_is_valid() {
        let s = LabelSchema::default_schema();
        s.validate().unwrap();
        assert_eq!(s.labels.len(), 13);
        let gaz: Vec<usize> = s
            .labels
            .iter()
            .flat_map(|l| l.gazetteers.iter().map(|g| g.phrases.len()))
            .collect();
        assert_eq!(gaz.len(), 4);
        assert_eq!(gaz.iter().max(), Some(&120));
        assert_eq!(gaz.iter().sum::<usize>() / gaz.len(), 51);
        let with_ctx: Vec<&str> = s
            .labels
            .iter()
            .filter(|l| !l.triggers.is_empty())
            .map(|l| l.label.as_str())
            .collect();
        assert_eq!(with_ctx, ["ASP-FOR-MI", "CREATININE", "HBA1C", "KETO-1YR"]);
    }

    #[test]
    fn gazetteer_entries_are_unique() {
        for l in LabelSchema::default_schema().labels {
            for g in l.gazetteers {
                let set: HashSet<_> = g.phrases.iter().collect();
                assert_eq!(set.len(), g.phrases.len(), "duplicate entry in {}", g.name);
            }
        }
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut s = LabelSchema::default_schema();
        s.labels[1].imports.push("NOPE".into());
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("schema.labels[1].imports[1]"), "{e}");

        let mut s = LabelSchema::default_schema();
        s.labels[0].label = "lower".into();
        assert!(s.validate().is_err());

        let mut s = LabelSchema::default_schema();
        s.labels[2].triggers[0].window = 0;
        assert!(s.validate().unwrap_err().to_string().contains("window"));

        let mut s = LabelSchema::default_schema();
        s.labels.pop();
        assert!(s.validate().is_err());
        s.label_count = 12;
        s.validate().unwrap();
    }
}
