use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    pub dropout: f64,
    /// Geometric positional encoding; sinusoidal encoding when off.
    pub use_gpe: bool,
    /// Geometric attention branch; the fusion weight is fixed at 0 when off.
    pub use_ga: bool,
    /// Geometry head, EMA residuals and FiLM; plain mean-pool classifier when off.
    pub use_ema: bool,
    pub ema_alpha: f64,
    pub ln_eps: f64,
    /// Feed the geometry head the input embedding instead of the last layer's output.
    pub head_on_input: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            layers: 4,
            heads: 4,
            ffn_mult: 4,
            dropout: 0.1,
            use_gpe: true,
            use_ga: true,
            use_ema: true,
            ema_alpha: 0.3,
            ln_eps: 1e-5,
            head_on_input: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 || self.ffn_mult == 0 {
            return Err(Error::InvalidArgument(
                "model sizes must be positive".into(),
            ));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::InvalidArgument(format!(
                "ema_alpha {} outside [0, 1]",
                self.ema_alpha
            )));
        }
        if self.ln_eps <= 0.0 {
            return Err(Error::InvalidArgument("ln_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn ffn_dim(&self) -> usize {
        self.d_model * self.ffn_mult
    }

    /// Whether a component, by its ablation name, is switched on.
    pub fn is_enabled(&self, component: &str) -> Result<bool> {
        match component {
            "gpe" => Ok(self.use_gpe),
            "ga" => Ok(self.use_ga),
            "ema" => Ok(self.use_ema),
            other => Err(Error::InvalidArgument(format!(
                "unknown component `{other}`"
            ))),
        }
    }

    /// Turns off one component by its ablation name (`gpe`, `ga` or `ema`).
    pub fn disable(&mut self, component: &str) -> Result<()> {
        match component {
            "gpe" => self.use_gpe = false,
            "ga" => self.use_ga = false,
            "ema" => self.use_ema = false,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown component `{other}`"
                )))
            }
        }
        Ok(())
    }
}
