//! Geometry-aware temporal transformer: positional encoding from feature
//! differences, fused temporal/geometric attention, a geometry head with EMA
//! residuals, and a FiLM-conditioned classifier.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod temporal;
pub mod weights;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::features::FEATURE_DIM;
use crate::linalg::Vec3;
use crate::numerics::{ParamSet, Tape, Tensor};

pub use checkpoint::Model;
pub use config::ModelConfig;
pub use network::{build_graph, Dropout, Graph};
pub use temporal::{ema_smooth, residuals, Directions};
pub use weights::init_params;

/// Result of one evaluation-mode forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    /// `[real, generated]`.
    pub logits: [f64; 2],
    /// Probability of the generated class.
    pub score: f64,
    /// Geometry-head directions per frame; empty when the EMA branch is disabled.
    pub u: Vec<Directions<f64>>,
    pub u_hat: Vec<Directions<f64>>,
    pub residuals: Vec<[f64; 4]>,
    /// Per layer, per head `A_tg`, each `T x T` row-major.
    pub attention: Vec<Vec<Vec<f64>>>,
}

/// Feature rows as a `[T, 21]` tensor.
pub fn feature_tensor(rows: &[[f64; FEATURE_DIM]]) -> Result<Tensor> {
    Tensor::matrix(
        rows.len(),
        FEATURE_DIM,
        rows.iter().flatten().copied().collect(),
    )
}

fn directions(t: &Tensor) -> Vec<Directions<f64>> {
    (0..t.rows())
        .map(|r| {
            let row = t.row(r);
            std::array::from_fn(|i| Vec3([row[3 * i], row[3 * i + 1], row[3 * i + 2]]))
        })
        .collect()
}

/// Two-class softmax, returning the generated-class probability.
pub fn generated_probability(logits: [f64; 2]) -> f64 {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    e1 / (e0 + e1)
}

/// Evaluation-mode forward pass (no dropout, no gradients).
pub fn forward(
    params: &ParamSet,
    cfg: &ModelConfig,
    features: &[[f64; FEATURE_DIM]],
) -> Result<ModelOutput> {
    cfg.validate()?;
    let x = feature_tensor(features)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, &|_| false)?;
    let g = build_graph(&mut tape, &bound, &x, cfg, None)?;
    let l = tape.value(g.logits).data();
    let logits = [l[0], l[1]];
    let opt_dirs =
        |v: Option<crate::numerics::Var>| v.map(|v| directions(tape.value(v))).unwrap_or_default();
    Ok(ModelOutput {
        logits,
        score: generated_probability(logits),
        u: opt_dirs(g.u),
        u_hat: opt_dirs(g.u_hat),
        residuals: g
            .residuals
            .map(|r| {
                let r = tape.value(r);
                (0..r.rows())
                    .map(|i| std::array::from_fn(|c| r.get(i, c)))
                    .collect()
            })
            .unwrap_or_default(),
        attention: g
            .attention
            .iter()
            .map(|heads| {
                heads
                    .iter()
                    .map(|&a| tape.value(a).data().to_vec())
                    .collect()
            })
            .collect(),
    })
}
