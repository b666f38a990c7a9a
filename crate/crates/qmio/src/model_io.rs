//! Hardware model files: canonical JSON with sorted keys.

use std::fs;
use std::path::{Path, PathBuf};

use qmio_core::hardware::{generate_hex_lattice, HardwareModel, ModelError};

/// The bundled 32-qubit hex-lattice model.
pub const QMIO32_JSON: &str = include_str!("../../../models/qmio32.json");

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("model file is not valid JSON for a hardware model: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

pub fn model_from_json(text: &str) -> Result<HardwareModel, ModelIoError> {
    let model: HardwareModel = serde_json::from_str(text)?;
    model.check()?;
    Ok(model)
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn model_to_json(model: &HardwareModel) -> String {
    let value = serde_json::to_value(model).expect("models serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

pub fn load_model(path: &Path) -> Result<HardwareModel, ModelIoError> {
    let text = fs::read_to_string(path).map_err(|source| ModelIoError::Io { path: path.to_owned(), source })?;
    model_from_json(&text)
}

pub fn save_model(path: &Path, model: &HardwareModel) -> Result<(), ModelIoError> {
    fs::write(path, model_to_json(model)).map_err(|source| ModelIoError::Io { path: path.to_owned(), source })
}

pub fn bundled_qmio32() -> HardwareModel {
    model_from_json(QMIO32_JSON).expect("bundled model is valid")
}

/// What `models/qmio32.json` is generated from.
pub fn generate_qmio32() -> HardwareModel {
    let mut m = generate_hex_lattice(32).expect("32 qubits is a valid lattice");
    m.name = String::from("qmio32");
    m
}

/// Loads `path`, or the bundled model when `path` is `None`.
pub fn load_or_bundled(path: Option<&Path>) -> Result<HardwareModel, ModelIoError> {
    match path {
        Some(p) => load_model(p),
        None => Ok(bundled_qmio32()),
    }
}
