//! Versioned JSON model files.
//!
//! ```json
//! {"schema_version": 1, "spec": {..}, "scalers": {"input": {..}, "output": {..}},
//!  "layers": [{"rows": .., "cols": .., "weights_row_major": [..], "bias": [..]}], "history": [..]}
//! ```
//! Floats are written in shortest round-trip form and parsed exactly, so a saved
//! model reproduces its predictions bit for bit.

use std::path::Path;

use epfx_core::mlp::{EpochRecord, Layer};
use epfx_core::{ModelSpec, ScalerParams, TrainedModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, ErrorKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelFileError {
    #[error("model file schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptPayload(String),
}

#[derive(Serialize, Deserialize)]
struct Scalers {
    input: ScalerParams,
    output: ScalerParams,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights_row_major: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    spec: ModelSpec,
    scalers: Scalers,
    layers: Vec<LayerRecord>,
    history: Vec<EpochRecord>,
}

pub fn save_model(model: &TrainedModel) -> Vec<u8> {
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        spec: model.spec.clone(),
        scalers: Scalers { input: model.input_scaler.clone(), output: model.output_scaler.clone() },
        layers: model
            .layers
            .iter()
            .map(|l| LayerRecord { rows: l.rows, cols: l.cols, weights_row_major: l.weights.clone(), bias: l.bias.clone() })
            .collect(),
        history: model.history.clone(),
    };
    let mut out = serde_json::to_vec(&file).expect("model serialises");
    out.push(b'\n');
    out
}

pub fn load_model(bytes: &[u8]) -> Result<TrainedModel, ModelFileError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ModelFileError::CorruptPayload(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelFileError::CorruptPayload("missing schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(ModelFileError::SchemaVersionMismatch { found: version, expected: SCHEMA_VERSION });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelFileError::CorruptPayload(e.to_string()))?;
    let model = TrainedModel {
        spec: file.spec,
        layers: file
            .layers
            .into_iter()
            .map(|l| Layer { rows: l.rows, cols: l.cols, weights: l.weights_row_major, bias: l.bias })
            .collect(),
        input_scaler: file.scalers.input,
        output_scaler: file.scalers.output,
        history: file.history,
    };
    model.validate().map_err(|e| ModelFileError::CorruptPayload(e.to_string()))?;
    Ok(model)
}

pub fn read_model(path: &Path) -> Result<TrainedModel, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::new(ErrorKind::ModelMismatch, format!("cannot read model file {}: {e}", path.display()))
    })?;
    load_model(&bytes).map_err(|e| CliError::new(ErrorKind::ModelMismatch, format!("{}: {e}", path.display())))
}
