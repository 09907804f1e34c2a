use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_lexicon, LabelSchema, NerTag};
use crate::ensemble::ComponentWeights;
use crate::error::{Error, Result};
use crate::pipeline::{schema_lexicon, Hyperparams};
use crate::tuner_eval::TuneGrid;

fn default_schema() -> LabelSchema {
    LabelSchema::default_schema()
}

/// One JSON document describing a full training run. Relative paths are
/// resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<PathBuf>,
    /// One phrase file per entity tag for the fallback tagger; defaults to
    /// the schema's gazetteer and trigger phrases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<BTreeMap<NerTag, PathBuf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_out: Option<PathBuf>,
    #[serde(default = "default_schema")]
    pub schema: LabelSchema,
    #[serde(default)]
    pub hyperparameters: Hyperparams,
    #[serde(default)]
    pub component_weights: ComponentWeights,
    #[serde(default)]
    pub grid: TuneGrid,
}

/// Finite and strictly positive; NaN fails.
fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl PipelineConfig {
    /// Defaults with the built-in schema.
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            seed,
            corpus: None,
            annotations: None,
            gold: None,
            lexicon: None,
            model_out: None,
            schema: default_schema(),
            hyperparameters: Hyperparams::default(),
            component_weights: ComponentWeights::default(),
            grid: TuneGrid::default(),
        }
    }

    /// Parses, resolves paths, loads gazetteer files and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::util::read_to_string(path)?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.schema.load_gazetteers(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        join(&mut self.corpus);
        join(&mut self.annotations);
        join(&mut self.gold);
        join(&mut self.model_out);
        if let Some(lex) = &mut self.lexicon {
            for p in lex.values_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    /// Makes every path absolute so the config can be written elsewhere.
    pub fn absolutize_paths(&mut self) -> Result<()> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            *p = std::path::absolute(&*p).map_err(|e| Error::io(p.clone(), e))?;
            Ok(())
        };
        for p in [
            &mut self.corpus,
            &mut self.annotations,
            &mut self.gold,
            &mut self.model_out,
        ]
        .into_iter()
        .flatten()
        {
            abs(p)?;
        }
        if let Some(lex) = &mut self.lexicon {
            for p in lex.values_mut() {
                abs(p)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        self.component_weights
            .validate()
            .map_err(|m| Error::config("component_weights", m))?;
        self.grid.validate()?;
        let h = &self.hyperparameters;
        if h.doc_clf.dim == 0 || h.doc_clf.bucket_count == 0 || !positive(h.doc_clf.lr0) {
            return Err(Error::config(
                "hyperparameters.doc_clf",
                "dim, bucket_count and lr0 must be positive",
            ));
        }
        if !positive(h.logreg.lr) || !non_negative(h.logreg.l2) {
            return Err(Error::config(
                "hyperparameters.logreg",
                "lr must be positive and l2 >= 0",
            ));
        }
        if !positive(h.svm.l2) {
            return Err(Error::config("hyperparameters.svm.l2", "must be positive"));
        }
        if h.gbdt.min_leaf == 0 || !positive(h.gbdt.shrinkage) {
            return Err(Error::config(
                "hyperparameters.gbdt",
                "min_leaf must be >= 1 and shrinkage positive",
            ));
        }
        if h.min_df == 0 {
            return Err(Error::config("hyperparameters.min_df", "must be >= 1"));
        }
        for (field, p) in [
            ("corpus", &self.corpus),
            ("annotations", &self.annotations),
            ("gold", &self.gold),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::config(
                        field,
                        format!("{} does not exist", p.display()),
                    ));
                }
            }
        }
        if let Some(lex) = &self.lexicon {
            for (tag, p) in lex {
                if !p.is_file() {
                    return Err(Error::config(
                        format!("lexicon.{tag}"),
                        format!("{} does not exist", p.display()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The fallback-tagger lexicon this config describes.
    pub fn fallback_lexicon(&self) -> Result<BTreeMap<String, NerTag>> {
        match &self.lexicon {
            Some(files) => load_lexicon(files.iter().map(|(t, p)| (*t, p.as_path()))),
            None => Ok(schema_lexicon(&self.schema)),
        }
    }

    pub fn require<'a>(&self, field: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value.as_deref().ok_or_else(|| {
            Error::config(field, "no path given in the config or on the command line")
        })
    }
}
