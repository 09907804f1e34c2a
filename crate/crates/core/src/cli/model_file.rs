use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::PipelineConfig;
use crate::corpus::NerTag;
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::features::TfidfModel;
use crate::pipeline::TrainedModel;
use crate::util::{to_canonical_json, write_atomic};

pub const FORMAT_VERSION: u64 = 1;

/// Everything `predict` needs, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    pub config: PipelineConfig,
    pub lexicon: BTreeMap<String, NerTag>,
    pub tfidf: TfidfModel,
    pub ensemble: EnsembleModel,
}

impl ModelPayload {
    pub fn trained(&self) -> TrainedModel {
        TrainedModel {
            tfidf: self.tfidf.clone(),
            ensemble: self.ensemble.clone(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `{format_version, checksum, payload}` with the SHA-256 of the payload's
/// canonical JSON.
pub fn encode_model(payload: &ModelPayload) -> Result<String> {
    let value = serde_json::to_value(payload)?;
    let checksum = sha256_hex(to_canonical_json(&value)?.as_bytes());
    let file = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "checksum": checksum,
        "payload": value,
    });
    to_canonical_json(&file)
}

pub fn decode_model(text: &str) -> Result<ModelPayload> {
    let mut file: Value = serde_json::from_str(text)?;
    let version = file.get("format_version").and_then(Value::as_u64);
    if version != Some(FORMAT_VERSION) {
        return Err(Error::ModelFile(format!(
            "format_version {version:?} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let checksum = file
        .get("checksum")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::ModelFile("missing checksum".into()))?
        .to_string();
    let payload = file
        .get_mut("payload")
        .map(Value::take)
        .ok_or_else(|| Error::ModelFile("missing payload".into()))?;
    let actual = sha256_hex(to_canonical_json(&payload)?.as_bytes());
    if actual != checksum {
        return Err(Error::ModelFile(format!(
            "checksum mismatch: stored {checksum}, computed {actual}"
        )));
    }
    let payload: ModelPayload = serde_json::from_value(payload)?;
    payload.ensemble.check_complete(&payload.config.schema)?;
    Ok(payload)
}

pub fn save_model(path: &Path, payload: &ModelPayload) -> Result<()> {
    write_atomic(path, encode_model(payload)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelPayload> {
    decode_model(&crate::util::read_to_string(path)?)
}
