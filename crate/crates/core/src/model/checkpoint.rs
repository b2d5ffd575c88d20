//! JSON checkpoint container. Each tensor carries its name, shape and its
//! values as base64 of consecutive little-endian IEEE-754 f64s.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError, Tensor};

pub const FORMAT: &str = "molseq-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: ModelConfig,
    pub vocab_hash: String,
    tensors: Vec<StoredTensor>,
}

fn encode(data: &[f64]) -> String {
    let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(text: &str) -> Result<Vec<f64>, CheckpointError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CheckpointError::Format(e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(CheckpointError::Format(
            "tensor byte length not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Checkpoint {
    pub fn from_model(model: &Model, vocab_hash: &str) -> Checkpoint {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            config: model.config().clone(),
            vocab_hash: vocab_hash.to_string(),
            tensors: model
                .tensors()
                .iter()
                .map(|t| StoredTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: encode(&t.data),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<Model, CheckpointError> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(CheckpointError::Format(format!(
                "unsupported container {} v{}",
                self.format, self.version
            )));
        }
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                Ok(Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: decode(&t.data)?,
                })
            })
            .collect::<Result<Vec<_>, CheckpointError>>()?;
        Ok(Model::from_tensors(self.config.clone(), tensors)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint, CheckpointError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}
