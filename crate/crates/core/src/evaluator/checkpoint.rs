//! JSON checkpoints: named arrays with explicit shapes plus run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{ModelConfig, ModelParams, BLOCK_NAMES};
use super::ModelError;

pub const CHECKPOINT_FORMAT: &str = "mole-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint does not match its model config: {0}")]
    Mismatch(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Block {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// On-disk form of [`ModelParams`] plus free-form run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub metadata: serde_json::Value,
    blocks: Vec<Block>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, metadata: serde_json::Value) -> Self {
        let blocks = params
            .blocks()
            .into_iter()
            .zip(params.shapes())
            .map(|((name, data), shape)| Block {
                name: name.to_string(),
                shape,
                data: data.to_vec(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: VERSION,
            model: params.config,
            metadata,
            blocks,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams, CheckpointError> {
        if self.format != CHECKPOINT_FORMAT || self.version != VERSION {
            return Err(CheckpointError::Format(format!(
                "unsupported format {:?} version {}",
                self.format, self.version
            )));
        }
        let mut params = ModelParams::zeros(self.model);
        let expected = params.shapes();
        for ((name, target), want) in params.blocks_mut().into_iter().zip(expected) {
            let block = self
                .blocks
                .iter()
                .find(|b| b.name == name)
                .ok_or_else(|| CheckpointError::Format(format!("missing block {name}")))?;
            if block.shape != want || block.data.len() != target.len() {
                return Err(ModelError::ShapeMismatch(format!(
                    "{name}: config implies {want:?}, checkpoint has {:?} with {} values",
                    block.shape,
                    block.data.len()
                ))
                .into());
            }
            target.copy_from_slice(&block.data);
        }
        if let Some(extra) = self
            .blocks
            .iter()
            .find(|b| !BLOCK_NAMES.contains(&b.name.as_str()))
        {
            return Err(CheckpointError::Format(format!(
                "unknown block {}",
                extra.name
            )));
        }
        params.check()?;
        Ok(params)
    }
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    metadata: serde_json::Value,
) -> Result<(), CheckpointError> {
    let ckpt = Checkpoint::from_params(params, metadata);
    let json = serde_json::to_string(&ckpt).map_err(|e| CheckpointError::Format(e.to_string()))?;
    fs::write(path, json).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CheckpointError::Format(e.to_string()))
}
