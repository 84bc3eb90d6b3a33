use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::io::read_json;
use crate::training::losses::GeometryWeights;

/// Optimization settings shared by both training stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak learning rate.
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    /// Learning rate of the last epoch, as a fraction of `lr`.
    pub final_lr_ratio: f64,
    pub label_smoothing: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    pub w_repj: f64,
    pub w_temp: f64,
    pub w_line: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::classifier()
    }
}

impl TrainConfig {
    pub fn classifier() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-4,
            weight_decay: 1e-4,
            warmup_epochs: 5,
            final_lr_ratio: 0.01,
            label_smoothing: 0.02,
            grad_clip: 1.0,
            w_repj: 1.0,
            w_temp: 1.0,
            w_line: 1.0,
            seed: 0,
        }
    }

    /// Per-sequence updates: small real sets still get enough steps to fit the head.
    pub fn pretrain() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 1,
            lr: 2e-4,
            ..Self::classifier()
        }
    }

    /// Reads a JSON config; missing fields take the values of `base`.
    pub fn load(path: &Path, base: &TrainConfig) -> Result<Self> {
        let overrides: serde_json::Value = read_json(path)?;
        let mut merged = serde_json::to_value(base)?;
        match (merged.as_object_mut(), overrides.as_object()) {
            (Some(m), Some(o)) => {
                for (k, v) in o {
                    if !m.contains_key(k) {
                        return Err(Error::Format {
                            path: path.to_path_buf(),
                            detail: format!("unknown field `{k}`"),
                        });
                    }
                    m.insert(k.clone(), v.clone());
                }
            }
            _ => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    detail: "expected a JSON object".into(),
                })
            }
        }
        let cfg: TrainConfig = serde_json::from_value(merged).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return Err(Error::InvalidArgument(format!(
                "label_smoothing {} outside [0, 0.5)",
                self.label_smoothing
            )));
        }
        if self.lr < 0.0 || self.weight_decay < 0.0 || self.grad_clip < 0.0 {
            return Err(Error::InvalidArgument(
                "lr, weight_decay and grad_clip must be >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.final_lr_ratio) {
            return Err(Error::InvalidArgument(
                "final_lr_ratio outside [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn geometry_weights(&self) -> GeometryWeights {
        GeometryWeights {
            repj: self.w_repj,
            temp: self.w_temp,
            line: self.w_line,
        }
    }

    pub fn clip(&self) -> Option<f64> {
        (self.grad_clip > 0.0).then_some(self.grad_clip)
    }
}

/// Learning rate of `epoch` (0-based): linear warmup reaching `lr` at the last
/// warmup epoch, then cosine decay to `final_lr_ratio * lr` at the last epoch.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    let w = cfg.warmup_epochs.min(cfg.epochs);
    if epoch < w {
        return cfg.lr * (epoch + 1) as f64 / w as f64;
    }
    let span = cfg.epochs.saturating_sub(w + 1);
    if span == 0 {
        return cfg.lr;
    }
    let progress = ((epoch - w) as f64 / span as f64).min(1.0);
    let floor = cfg.lr * cfg.final_lr_ratio;
    floor + 0.5 * (cfg.lr - floor) * (1.0 + (std::f64::consts::PI * progress).cos())
}
