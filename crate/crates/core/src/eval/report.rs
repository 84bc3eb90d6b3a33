use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{average_precision, f1_at_threshold, roc_auc};
use crate::geometry::features::{FeatureSequence, Label};
use crate::geometry::io::write_json;
use crate::model::Model;
use crate::training::score_sequences;

/// Threshold on the generated-class probability for F1.
pub const F1_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc_roc: f64,
    pub ap: f64,
    /// F1 of the generated class at [`F1_THRESHOLD`].
    pub f1: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub per_sample: Vec<SampleScore>,
}

impl MetricsReport {
    pub fn from_scores(per_sample: Vec<SampleScore>) -> Result<Self> {
        let labels: Vec<bool> = per_sample.iter().map(|s| s.label.is_positive()).collect();
        let scores: Vec<f64> = per_sample.iter().map(|s| s.score).collect();
        let n_pos = labels.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == labels.len() {
            return Err(Error::SingleClass);
        }
        Ok(MetricsReport {
            auc_roc: roc_auc(&scores, &labels)?,
            ap: average_precision(&scores, &labels)?,
            f1: f1_at_threshold(&scores, &labels, F1_THRESHOLD)?,
            n_pos,
            n_neg: labels.len() - n_pos,
            per_sample,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Scores every sequence and summarizes.
pub fn evaluate(model: &Model, data: &[FeatureSequence]) -> Result<MetricsReport> {
    let labels: Vec<Label> = data.iter().map(|s| s.label).collect();
    if !labels.contains(&Label::Real) || !labels.contains(&Label::Generated) {
        return Err(Error::SingleClass);
    }
    let scores = score_sequences(model, data)?;
    MetricsReport::from_scores(
        data.iter()
            .zip(scores)
            .map(|(s, score)| SampleScore {
                id: s.video_id.clone(),
                label: s.label,
                score,
            })
            .collect(),
    )
}
