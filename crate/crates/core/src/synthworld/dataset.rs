//! Synthetic datasets of smooth ("real") and jittered ("generated") sequences.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::camera::Intrinsics;
use crate::geometry::features::{frame_seed, Label};
use crate::geometry::io::{
    read_json, read_segments, write_json, write_segments, IntrinsicsSidecar,
};
use crate::geometry::lines::FrameLines;
use crate::linalg::Vec3;
use crate::manifest::{Manifest, ManifestEntry, Split};
use crate::synthworld::render::{render_line_segments, Scene, SceneSpec};
use crate::synthworld::trajectory::{
    apply_jitter, generate_trajectory, CameraTrajectory, JitterSpec, TrajectoryConfig,
};

pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const GROUND_TRUTH_FILE: &str = "gt.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    /// 5/7, 1/7, 1/7: 400/80/80 for the default 560 samples.
    fn default() -> Self {
        SplitFractions {
            train: 5.0 / 7.0,
            val: 1.0 / 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_real: usize,
    pub n_generated: usize,
    pub frames: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub focal_range: (f64, f64),
    /// Per-axis room size variation, as a fraction of the scene dimensions.
    pub room_variation: f64,
    pub jitter: JitterSpec,
    pub scene: SceneSpec,
    pub trajectory: TrajectoryConfig,
    pub split: SplitFractions,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_real: 280,
            n_generated: 280,
            frames: 40,
            seed: 0,
            width: 640,
            height: 480,
            focal_range: (450.0, 650.0),
            room_variation: 0.15,
            jitter: JitterSpec::default(),
            scene: SceneSpec::default(),
            trajectory: TrajectoryConfig::default(),
            split: SplitFractions::default(),
        }
    }
}

/// One synthetic sequence with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub id: String,
    pub label: Label,
    pub frames: Vec<FrameLines<f64>>,
    pub intrinsics: Vec<Intrinsics<f64>>,
    /// Per frame: the three scene axes in camera coordinates.
    pub gt_directions: Vec<[Vec3<f64>; 3]>,
    pub trajectory: CameraTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GroundTruthFile {
    gt_directions: Vec<[[f64; 3]; 3]>,
}

/// Seed of sample `index`, independent of generation order.
pub fn sample_seed(master: u64, index: usize) -> u64 {
    frame_seed(master ^ 0x5EED_0000_0000_0001, index)
}

pub fn sample_id(label: Label, index: usize) -> String {
    format!("{}-{index:04}", label.as_str())
}

/// Samples `0..n_real` are real, the rest generated.
pub fn generate_sample(cfg: &DatasetConfig, index: usize) -> Result<SyntheticSample> {
    let label = if index < cfg.n_real {
        Label::Real
    } else {
        Label::Generated
    };
    let class_index = if label == Label::Real {
        index
    } else {
        index - cfg.n_real
    };
    let seed = sample_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let v = cfg.room_variation;
    let dims = cfg
        .scene
        .dims
        .map(|d| d * rng.random_range((1.0 - v)..=(1.0 + v)));
    let scene = Scene::build(&SceneSpec {
        dims,
        lines_per_axis: cfg.scene.lines_per_axis,
        seed: rng.random(),
    })?;
    let f = rng.random_range(cfg.focal_range.0..=cfg.focal_range.1);
    let k = Intrinsics::new(f, f, cfg.width as f64 / 2.0, cfg.height as f64 / 2.0)?;

    let traj_cfg = TrajectoryConfig {
        room: dims,
        ..cfg.trajectory.clone()
    };
    let smooth = generate_trajectory(rng.random(), cfg.frames, &traj_cfg)?;
    let jitter_seed: u64 = rng.random();
    let trajectory = match label {
        Label::Real => smooth,
        Label::Generated => apply_jitter(&smooth, &cfg.jitter, jitter_seed)?,
    };

    let render_seed: u64 = rng.random();
    let mut frames = Vec::with_capacity(cfg.frames);
    let mut gt = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let r = render_line_segments(
            &scene,
            &trajectory.rotations[t],
            &trajectory.translations[t],
            &k,
            (cfg.width, cfg.height),
            &cfg.jitter,
            t,
            frame_seed(render_seed, t),
        )?;
        frames.push(r.lines);
        gt.push(r.gt_directions);
    }
    Ok(SyntheticSample {
        id: sample_id(label, class_index),
        label,
        frames,
        intrinsics: vec![k; cfg.frames],
        gt_directions: gt,
        trajectory,
    })
}

pub fn write_sample(
    dir: &Path,
    sample: &SyntheticSample,
    width: usize,
    height: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_segments(&dir.join(SEGMENTS_FILE), &sample.frames)?;
    IntrinsicsSidecar {
        width: Some(width),
        height: Some(height),
        frames: sample.intrinsics.clone(),
    }
    .write(&dir.join(INTRINSICS_FILE))?;
    let gt = GroundTruthFile {
        gt_directions: sample
            .gt_directions
            .iter()
            .map(|d| d.map(|v| v.0))
            .collect(),
    };
    write_json(&dir.join(GROUND_TRUTH_FILE), &gt)
}

/// Segments and intrinsics of a sample directory.
pub fn load_sample(dir: &Path) -> Result<(Vec<FrameLines<f64>>, IntrinsicsSidecar)> {
    let frames = read_segments(&dir.join(SEGMENTS_FILE))?;
    let sidecar = IntrinsicsSidecar::read(&dir.join(INTRINSICS_FILE))?;
    Ok((frames, sidecar))
}

pub fn load_ground_truth(dir: &Path) -> Result<Vec<[Vec3<f64>; 3]>> {
    let gt: GroundTruthFile = read_json(&dir.join(GROUND_TRUTH_FILE))?;
    Ok(gt.gt_directions.iter().map(|d| d.map(Vec3)).collect())
}

/// Stable 64-bit FNV-1a hash of an id mixed with a seed.
pub fn stable_hash(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    frame_seed(h, 0)
}

/// Per class: ids ranked by hash, the first `round(n * train)` go to train,
/// the next `round(n * val)` to val, the remainder to test.
pub fn assign_splits(ids: &[(String, Label)], seed: u64, fractions: &SplitFractions) -> Vec<Split> {
    let mut out = vec![Split::Test; ids.len()];
    for label in [Label::Real, Label::Generated] {
        let mut members: Vec<usize> = (0..ids.len()).filter(|&i| ids[i].1 == label).collect();
        members.sort_by_key(|&i| (stable_hash(seed, &ids[i].0), i));
        let n = members.len() as f64;
        let n_train = (n * fractions.train).round() as usize;
        let n_val =
            ((n * fractions.val).round() as usize).min(members.len() - n_train.min(members.len()));
        for (rank, &i) in members.iter().enumerate() {
            out[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    out
}

/// Generates every sample under `out_dir/samples/<id>` and writes `out_dir/manifest.json`.
pub fn make_dataset(out_dir: &Path, cfg: &DatasetConfig) -> Result<Manifest> {
    if cfg.n_real == 0 || cfg.n_generated == 0 {
        return Err(Error::InvalidArgument(
            "need at least one sample per class".into(),
        ));
    }
    if cfg.split.train < 0.0 || cfg.split.val < 0.0 || cfg.split.train + cfg.split.val > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "invalid split fractions {:?}",
            cfg.split
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let total = cfg.n_real + cfg.n_generated;
    let ids: Vec<(String, Label)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let s = generate_sample(cfg, i)?;
            write_sample(
                &out_dir.join("samples").join(&s.id),
                &s,
                cfg.width,
                cfg.height,
            )?;
            Ok((s.id, s.label))
        })
        .collect::<Result<_>>()?;
    let splits = assign_splits(&ids, cfg.seed, &cfg.split);
    let samples = ids
        .into_iter()
        .zip(splits)
        .map(|((id, label), split)| ManifestEntry {
            path: format!("samples/{id}"),
            id,
            label,
            split,
        })
        .collect();
    let manifest = Manifest::new(samples, out_dir)?;
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts_follow_fractions() {
        let ids: Vec<(String, Label)> = (0..280)
            .map(|i| (sample_id(Label::Real, i), Label::Real))
            .chain((0..280).map(|i| (sample_id(Label::Generated, i), Label::Generated)))
            .collect();
        let f = SplitFractions {
            train: 5.0 / 7.0,
            val: 1.0 / 7.0,
        };
        let s = assign_splits(&ids, 3, &f);
        let count = |sp| s.iter().filter(|&&x| x == sp).count();
        assert_eq!(
            (count(Split::Train), count(Split::Val), count(Split::Test)),
            (400, 80, 80)
        );
    }

    #[test]
    fn generated_sample_is_labeled_and_sized() {
        let cfg = DatasetConfig {
            n_real: 1,
            n_generated: 1,
            frames: 5,
            ..Default::default()
        };
        let s = generate_sample(&cfg, 1).unwrap();
        assert_eq!(s.label, Label::Generated);
        assert_eq!(s.id, "generated-0000");
        assert_eq!(s.frames.len(), 5);
        assert_eq!(s.gt_directions.len(), 5);
    }
}
