//! Retraining with one component switched off.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::report::{evaluate, MetricsReport};
use crate::geometry::features::FeatureSequence;
use crate::model::Model;
use crate::training::{train_classifier, EpochRecord, TrainConfig};

pub const ABLATION_MODEL_FILE: &str = "model.json";
pub const ABLATION_HISTORY_FILE: &str = "history.jsonl";
pub const ABLATION_REPORT_FILE: &str = "report.json";

/// Components that can be switched off.
pub const COMPONENTS: [&str; 3] = ["gpe", "ga", "ema"];

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub component: String,
    pub report: MetricsReport,
    pub history: Vec<EpochRecord>,
}

/// One JSON object per line.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in history {
        writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Disables `component` in the pretrained model's config, trains the classifier,
/// scores `test`, and writes the model, history and report into `out_dir`.
pub fn run_ablation(
    train: &[FeatureSequence],
    val: &[FeatureSequence],
    test: &[FeatureSequence],
    geo: &Model,
    component: &str,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<AblationOutcome> {
    let mut base = geo.clone();
    base.config.disable(component)?;
    let out = train_classifier(train, val, &base, cfg)?;
    let report = evaluate(&out.model, test)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    out.model.save(&out_dir.join(ABLATION_MODEL_FILE))?;
    write_history(&out_dir.join(ABLATION_HISTORY_FILE), &out.history)?;
    report.save(&out_dir.join(ABLATION_REPORT_FILE))?;
    Ok(AblationOutcome {
        component: component.to_string(),
        report,
        history: out.history,
    })
}
