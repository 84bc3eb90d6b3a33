//! Per-sample diagnostic exports: VP trajectories, residual curves and SVG plots.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::features::{FeatureSequence, Label};
use crate::model::Model;

pub const VP_TRAJECTORY_FILE: &str = "vp_trajectory.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const PLOT_FILE: &str = "residuals.svg";

pub const VP_TRAJECTORY_HEADER: [&str; 10] = [
    "t", "u1", "v1", "vis1", "u2", "v2", "vis2", "u3", "v3", "vis3",
];
pub const RESIDUALS_HEADER: [&str; 5] = ["t", "r_ang", "r_vel", "r_acc", "r_ort"];

/// 17 significant digits: re-parsing gives back the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

/// Writes a header and rows of numbers; the first column is the frame index.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for (t, row) in rows.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|&v| format_value(v)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_table`], dropping the index column.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Format {
                    path: path.to_path_buf(),
                    detail: format!("`{f}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Per frame `[u1, v1, vis1, u2, v2, vis2, u3, v3, vis3]` in reference-camera pixels.
pub fn vp_trajectory(seq: &FeatureSequence) -> Vec<Vec<f64>> {
    seq.lines
        .iter()
        .map(|r| {
            (0..3)
                .flat_map(|i| {
                    [
                        r.vp2d[i][0],
                        r.vp2d[i][1],
                        if r.visible[i] { 1.0 } else { 0.0 },
                    ]
                })
                .collect()
        })
        .collect()
}

/// Analysis of one sequence.
#[derive(Debug, Clone)]
pub struct SampleAnalysis {
    pub id: String,
    pub label: Label,
    pub vp_trajectory: Vec<Vec<f64>>,
    pub residuals: Vec<[f64; 4]>,
}

pub fn analyze_sequence(model: &Model, seq: &FeatureSequence) -> Result<SampleAnalysis> {
    if !model.config.use_ema {
        return Err(Error::InvalidArgument(
            "the checkpoint has the EMA residual branch disabled".into(),
        ));
    }
    let out = model.forward(&seq.features)?;
    Ok(SampleAnalysis {
        id: seq.video_id.clone(),
        label: seq.label,
        vp_trajectory: vp_trajectory(seq),
        residuals: out.residuals,
    })
}

/// Per-frame mean angular residual of one class, over the frames every member has.
pub fn class_mean_angular(samples: &[SampleAnalysis], label: Label) -> Vec<f64> {
    let members: Vec<&SampleAnalysis> = samples.iter().filter(|s| s.label == label).collect();
    let Some(len) = members.iter().map(|s| s.residuals.len()).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|t| members.iter().map(|s| s.residuals[t][0]).sum::<f64>() / members.len() as f64)
        .collect()
}

const W: f64 = 640.0;
const H: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn polyline(values: &[f64], y_max: f64, style: &str) -> String {
    let n = values.len().max(2) - 1;
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            let x = MARGIN + (W - 2.0 * MARGIN) * t as f64 / n as f64;
            let y = H - MARGIN - (H - 2.0 * MARGIN) * (v / y_max).min(1.0);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        "<polyline fill=\"none\" {style} points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// Angular residual of one sample over the per-class mean curves.
pub fn residual_plot(sample: &SampleAnalysis, real_mean: &[f64], generated_mean: &[f64]) -> String {
    let own: Vec<f64> = sample.residuals.iter().map(|r| r[0]).collect();
    let y_max = own
        .iter()
        .chain(real_mean)
        .chain(generated_mean)
        .copied()
        .fold(0.0, f64::max)
        .max(1e-6);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{MARGIN}\" y=\"{ty}\" font-size=\"14\">{id} ({label}): angular residual (rad), max {y_max:.4}</text>\n\
         <text x=\"{r}\" y=\"{lx}\" font-size=\"12\" text-anchor=\"end\">frame</text>\n",
        b = H - MARGIN,
        r = W - MARGIN,
        ty = MARGIN - 16.0,
        lx = H - MARGIN + 20.0,
        id = sample.id,
        label = sample.label.as_str(),
    );
    s += &polyline(
        real_mean,
        y_max,
        "stroke=\"#1f77b4\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"",
    );
    s += &polyline(
        generated_mean,
        y_max,
        "stroke=\"#d62728\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"",
    );
    let own_color = if sample.label == Label::Real {
        "#1f77b4"
    } else {
        "#d62728"
    };
    s += &polyline(
        &own,
        y_max,
        &format!("stroke=\"{own_color}\" stroke-width=\"2.5\""),
    );
    s += &format!(
        "<text x=\"{x}\" y=\"{y1}\" font-size=\"12\" fill=\"#1f77b4\">dashed: mean real</text>\n\
         <text x=\"{x}\" y=\"{y2}\" font-size=\"12\" fill=\"#d62728\">dashed: mean generated</text>\n</svg>\n",
        x = W - MARGIN - 150.0,
        y1 = MARGIN,
        y2 = MARGIN + 16.0,
    );
    s
}

/// Writes `<out>/<id>/{vp_trajectory.csv, residuals.csv, residuals.svg}` for every sequence.
pub fn write_analysis(
    model: &Model,
    data: &[FeatureSequence],
    out: &Path,
) -> Result<Vec<SampleAnalysis>> {
    let samples = data
        .iter()
        .map(|s| analyze_sequence(model, s))
        .collect::<Result<Vec<_>>>()?;
    let real_mean = class_mean_angular(&samples, Label::Real);
    let gen_mean = class_mean_angular(&samples, Label::Generated);
    for a in &samples {
        let dir = out.join(&a.id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_table(
            &dir.join(VP_TRAJECTORY_FILE),
            &VP_TRAJECTORY_HEADER,
            &a.vp_trajectory,
        )?;
        let rows: Vec<Vec<f64>> = a.residuals.iter().map(|r| r.to_vec()).collect();
        write_table(&dir.join(RESIDUALS_FILE), &RESIDUALS_HEADER, &rows)?;
        let svg = dir.join(PLOT_FILE);
        fs::write(&svg, residual_plot(a, &real_mean, &gen_mean)).map_err(|e| Error::io(&svg, e))?;
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }
}
