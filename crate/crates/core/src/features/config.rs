use serde::{Deserialize, Serialize};

use crate::corpus::NerTag;
use crate::ensemble::ComponentWeights;

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_FAMILY_WEIGHT: f64 = 2.0;

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn default_family_weight() -> f64 {
    DEFAULT_FAMILY_WEIGHT
}

/// A gazetteer whose matches emit their surrounding tokens as features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerSpec {
    pub name: String,
    /// Phrase file, relative to the config file. Loaded into `phrases`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default)]
    pub phrases: Vec<String>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_family_weight")]
    pub weight: f64,
    /// Entity tag the entries denote; used by the fallback tagger and the generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<NerTag>,
}

/// Trigger words whose neighbourhood becomes `ctx:` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub words: Vec<String>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_family_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<NerTag>,
}

/// Per-label feature recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub label: String,
    #[serde(default = "one")]
    pub tfidf_weight: f64,
    #[serde(default = "one")]
    pub kw_weight: f64,
    #[serde(default)]
    pub gazetteers: Vec<GazetteerSpec>,
    #[serde(default)]
    pub triggers: Vec<TriggerSpec>,
    /// Labels whose context features are also added to this label's vector.
    #[serde(default)]
    pub imports: Vec<String>,
    #[serde(default = "yes")]
    pub use_doc_clf: bool,
    /// Overrides the pipeline-wide ensemble weights for this label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_weights: Option<ComponentWeights>,
}

impl LabelConfig {
    pub fn new(label: impl Into<String>) -> Self {
        LabelConfig {
            label: label.into(),
            tfidf_weight: 1.0,
            kw_weight: 1.0,
            gazetteers: Vec::new(),
            triggers: Vec::new(),
            imports: Vec::new(),
            use_doc_clf: true,
            component_weights: None,
        }
    }
}
