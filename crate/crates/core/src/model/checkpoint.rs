//! Model bundle and its JSON checkpoint format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::features::FEATURE_DIM;
use crate::geometry::io::{read_json, write_json};
use crate::model::config::ModelConfig;
use crate::model::weights::{expected_shapes, init_params, HEAD_GROUP};
use crate::model::{forward, ModelOutput};
use crate::numerics::{ParamSet, Tensor};

pub const FORMAT_VERSION: u32 = 1;

/// Configuration, parameters and which groups are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub frozen: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: ModelConfig,
    frozen: Vec<String>,
    params: BTreeMap<String, StoredTensor>,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, seed);
        Ok(Model {
            config,
            params,
            frozen: Vec::new(),
        })
    }

    pub fn head_frozen(&self) -> bool {
        self.frozen.iter().any(|g| g == HEAD_GROUP)
    }

    pub fn freeze_head(&mut self) {
        if !self.head_frozen() {
            self.frozen.push(HEAD_GROUP.to_string());
        }
    }

    pub fn forward(&self, features: &[[f64; FEATURE_DIM]]) -> Result<ModelOutput> {
        forward(&self.params, &self.config, features)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            frozen: self.frozen.clone(),
            params: self
                .params
                .iter()
                .map(|(n, t)| {
                    (
                        n.clone(),
                        StoredTensor {
                            shape: t.shape().to_vec(),
                            data: t.data().to_vec(),
                        },
                    )
                })
                .collect(),
        };
        write_json(path, &file)
    }

    /// Loads a checkpoint and checks every tensor against the shapes its config implies.
    pub fn load(path: &Path) -> Result<Self> {
        let file: CheckpointFile = read_json(path)?;
        let bad = |detail: String| Error::Checkpoint(format!("{}: {detail}", path.display()));
        if file.format_version != FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        file.config.validate().map_err(|e| bad(e.to_string()))?;
        let mut params = ParamSet::new();
        let mut stored = file.params;
        for (name, shape) in expected_shapes(&file.config) {
            let t = stored
                .remove(&name)
                .ok_or_else(|| bad(format!("missing parameter `{name}`")))?;
            if t.shape != shape {
                return Err(bad(format!(
                    "`{name}` has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            params.insert(
                name,
                Tensor::new(t.shape, t.data).map_err(|e| bad(e.to_string()))?,
            );
        }
        if let Some(extra) = stored.keys().next() {
            return Err(bad(format!("unexpected parameter `{extra}`")));
        }
        if let Some(g) = file.frozen.iter().find(|g| *g != HEAD_GROUP) {
            return Err(bad(format!("unknown frozen group `{g}`")));
        }
        Ok(Model {
            config: file.config,
            params,
            frozen: file.frozen,
        })
    }
}
