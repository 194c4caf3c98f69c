//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::DeltaModel;
use crate::encoding::EncodingScheme;
use crate::error::{Error, Result};

/// Bumped whenever the serialized layout changes incompatibly.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "delta-uq-model";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    format_version: u32,
    library_version: String,
    scheme: EncodingScheme,
    prior_fingerprint: String,
    model: DeltaModel,
}

/// Serializes a model with its format version and prior fingerprint.
pub fn model_to_json(model: &DeltaModel) -> Result<String> {
    let file = ModelFile {
        format: FORMAT_TAG.into(),
        format_version: MODEL_FORMAT_VERSION,
        library_version: env!("CARGO_PKG_VERSION").into(),
        scheme: model.scheme,
        prior_fingerprint: model.training_prior.fingerprint(),
        model: model.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Parses a model, rejecting unknown versions and tampered priors.
pub fn model_from_json(text: &str) -> Result<DeltaModel> {
    let header: serde_json::Value = serde_json::from_str(text)?;
    match header.get("format").and_then(|v| v.as_str()) {
        Some(FORMAT_TAG) => {}
        other => return Err(Error::ModelFile(format!("not a model file (format tag {other:?})"))),
    }
    let version = header.get("format_version").and_then(|v| v.as_u64());
    if version != Some(u64::from(MODEL_FORMAT_VERSION)) {
        return Err(Error::ModelFile(format!(
            "unsupported format version {version:?}, this build reads {MODEL_FORMAT_VERSION}"
        )));
    }
    let file: ModelFile = serde_json::from_value(header)?;
    if file.scheme != file.model.scheme {
        return Err(Error::ModelFile("header scheme disagrees with the model body".into()));
    }
    let actual = file.model.training_prior.fingerprint();
    if actual != file.prior_fingerprint {
        return Err(Error::ModelFile(format!(
            "anchor prior fingerprint mismatch: header {}, data {actual}",
            file.prior_fingerprint
        )));
    }
    Ok(file.model)
}

pub fn save_model(model: &DeltaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DeltaModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
