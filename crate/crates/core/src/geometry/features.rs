//! Per-frame 21-dimensional geometric features and their temporal stacking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::camera::{normalize_direction_gen, normalize_direction_real, Intrinsics};
use crate::geometry::lines::{FrameLines, LineSegment};
use crate::geometry::vanishing::{estimate_vanishing_points, VanishingPointEstimate, VpConfig};
use crate::linalg::Vec3;

pub const FEATURE_DIM: usize = 21;

/// Clamp for diagonal-normalized pixel quantities.
pub const NORMALIZED_CLAMP: f64 = 8.0;

/// Video class. `Generated` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Generated,
}

impl Label {
    pub fn class_index(self) -> usize {
        match self {
            Label::Real => 0,
            Label::Generated => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Generated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Generated => "generated",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Label::Real),
            "generated" | "fake" => Ok(Label::Generated),
            other => Err(Error::LabelError(format!("unknown label `{other}`"))),
        }
    }
}

/// Which normalization a sequence gets.
pub type Domain = Label;

/// One frame's feature row:
/// `[v1_3d, v2_3d, v3_3d, v1_2d, v2_2d, v3_2d, d, m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFeature(pub [f64; FEATURE_DIM]);

impl FrameFeature {
    pub fn zero() -> Self {
        FrameFeature([0.0; FEATURE_DIM])
    }

    pub fn direction(&self, i: usize) -> Vec3<f64> {
        Vec3([self.0[3 * i], self.0[3 * i + 1], self.0[3 * i + 2]])
    }

    pub fn visible(&self, i: usize) -> bool {
        self.0[18 + i] > 0.5
    }

    /// Assembles a row from unit directions, pixel VPs and outside distances.
    pub fn assemble(
        est: &VanishingPointEstimate<f64>,
        directions: &[Vec3<f64>; 3],
        diagonal: f64,
    ) -> Self {
        let mut f = [0.0; FEATURE_DIM];
        for i in 0..3 {
            if !est.visible[i] {
                continue;
            }
            f[3 * i..3 * i + 3].copy_from_slice(&directions[i].0);
            for c in 0..2 {
                f[9 + 2 * i + c] =
                    (est.vp2d[i][c] / diagonal).clamp(-NORMALIZED_CLAMP, NORMALIZED_CLAMP);
            }
            f[15 + i] = est.outside[i].min(NORMALIZED_CLAMP);
            f[18 + i] = 1.0;
        }
        FrameFeature(f)
    }
}

/// Per-frame record kept next to the feature rows, used by geometry-head pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub width: usize,
    pub height: usize,
    pub segments: Vec<[f64; 4]>,
    /// VP slot each segment supports, `-1` when unassigned.
    pub assignments: Vec<i64>,
    /// Pixel vanishing points per slot, expressed for the reference camera.
    pub vp2d: [[f64; 2]; 3],
    pub visible: [bool; 3],
}

impl FrameRecord {
    pub fn segment(&self, k: usize) -> LineSegment<f64> {
        let s = self.segments[k];
        LineSegment::new([s[0], s[1]], [s[2], s[3]])
    }

    pub fn assignment(&self, k: usize) -> Option<usize> {
        usize::try_from(self.assignments[k]).ok()
    }
}

/// `T x 21` geometric sequence plus what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub video_id: String,
    pub label: Label,
    #[serde(rename = "T")]
    pub t: usize,
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub lines: Vec<FrameRecord>,
    pub k_ref: Intrinsics<f64>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn row(&self, t: usize) -> FrameFeature {
        FrameFeature(self.features[t])
    }

    /// Feature matrix flattened row-major.
    pub fn flat(&self) -> Vec<f64> {
        self.features.iter().flatten().copied().collect()
    }
}

/// Options for [`build_sequence`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub vp: VpConfig,
}

/// All orderings of three slots.
pub const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Picks the permutation (new slot `i` <- detected `perm[i]`) maximizing
/// `sum |track_i . d_perm[i]|` over visible detections. Ties keep the earlier
/// permutation in [`PERMUTATIONS`].
pub fn associate(track: &[Vec3<f64>; 3], dirs: &[Vec3<f64>; 3], visible: &[bool; 3]) -> [usize; 3] {
    let mut best = PERMUTATIONS[0];
    let mut best_score = f64::NEG_INFINITY;
    for perm in PERMUTATIONS {
        let score: f64 = (0..3)
            .filter(|&i| visible[perm[i]])
            .map(|i| track[i].dot(&dirs[perm[i]]).abs())
            .sum();
        if score > best_score + 1e-12 {
            best_score = score;
            best = perm;
        }
    }
    best
}

/// Seed for the RANSAC of one frame, so frames can be processed in any order.
pub fn frame_seed(base: u64, frame_index: usize) -> u64 {
    let mut z = base ^ (frame_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-frame VP estimation, returning an all-invisible estimate for empty frames.
pub fn estimate_frame(
    lines: &FrameLines<f64>,
    k: &Intrinsics<f64>,
    cfg: &VpConfig,
) -> Result<VanishingPointEstimate<f64>> {
    let cfg = VpConfig {
        seed: frame_seed(cfg.seed, lines.frame_index),
        ..cfg.clone()
    };
    match estimate_vanishing_points(lines, k, &cfg) {
        Ok(est) => Ok(est),
        Err(Error::NoLines) => Ok(VanishingPointEstimate::invisible(0)),
        Err(e) => Err(e),
    }
}

/// Per-frame estimates in frame order, detected with each frame's own
/// intrinsics for real videos and with `k_ref` for generated ones.
pub fn estimate_sequence(
    frames: &[(FrameLines<f64>, Intrinsics<f64>)],
    domain: Domain,
    k_ref: &Intrinsics<f64>,
    cfg: &SequenceConfig,
) -> Result<Vec<VanishingPointEstimate<f64>>> {
    frames
        .par_iter()
        .map(|(lines, k_t)| {
            let k_detect = match domain {
                Label::Real => k_t,
                Label::Generated => k_ref,
            };
            estimate_frame(lines, k_detect, &cfg.vp)
        })
        .collect()
}

/// Builds the feature sequence of a video from per-frame lines and intrinsics.
///
/// Real videos map each frame's observation into the reference camera using its
/// own intrinsics; generated videos unproject with `k_ref` directly.
pub fn build_sequence(
    video_id: &str,
    frames: &[(FrameLines<f64>, Intrinsics<f64>)],
    domain: Domain,
    k_ref: &Intrinsics<f64>,
    cfg: &SequenceConfig,
) -> Result<FeatureSequence> {
    if frames.len() < 2 {
        return Err(Error::TooShort(frames.len()));
    }
    k_ref.validate()?;
    let mut frames = frames.to_vec();
    frames.sort_by_key(|(l, _)| l.frame_index);
    let estimates = estimate_sequence(&frames, domain, k_ref, cfg)?;
    assemble_sequence(video_id, &frames, domain, k_ref, estimates)
}

/// Associates per-frame estimates into stable slots and assembles the sequence.
/// `frames` and `estimates` must be in frame order.
pub fn assemble_sequence(
    video_id: &str,
    frames: &[(FrameLines<f64>, Intrinsics<f64>)],
    domain: Domain,
    k_ref: &Intrinsics<f64>,
    estimates: Vec<VanishingPointEstimate<f64>>,
) -> Result<FeatureSequence> {
    if frames.len() != estimates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} frames but {} estimates",
            frames.len(),
            estimates.len()
        )));
    }
    let mut track = [Vec3::unit(0), Vec3::unit(1), Vec3::unit(2)];
    let mut features = Vec::with_capacity(frames.len());
    let mut records = Vec::with_capacity(frames.len());
    for ((lines, k_t), est) in frames.iter().zip(estimates) {
        let mut dirs = [Vec3::zero(); 3];
        let mut est = est;
        for s in 0..3 {
            if !est.visible[s] {
                continue;
            }
            dirs[s] = match domain {
                Label::Real => normalize_direction_real(est.vp2d[s], k_t, k_ref),
                Label::Generated => normalize_direction_gen(est.vp2d[s], k_ref),
            };
            // pixel VP as seen by the reference camera
            if let Some(p) = k_ref.project(&dirs[s]) {
                est.vp2d[s] = p;
            }
        }
        let perm = associate(&track, &dirs, &est.visible);
        let est = est.permuted(perm);
        let dirs = perm.map(|o| dirs[o]);
        for s in 0..3 {
            if est.visible[s] {
                track[s] = dirs[s];
            }
        }
        features.push(FrameFeature::assemble(&est, &dirs, lines.diagonal()).0);
        let n = lines.segments.len();
        records.push(FrameRecord {
            frame: lines.frame_index,
            width: lines.width,
            height: lines.height,
            segments: lines
                .segments
                .iter()
                .map(|s| [s.p1[0], s.p1[1], s.p2[0], s.p2[1]])
                .collect(),
            assignments: (0..n)
                .map(|k| {
                    est.assignments
                        .get(k)
                        .copied()
                        .flatten()
                        .map_or(-1, |a| a as i64)
                })
                .collect(),
            vp2d: est.vp2d,
            visible: est.visible,
        });
    }
    Ok(FeatureSequence {
        video_id: video_id.to_string(),
        label: domain,
        t: features.len(),
        features,
        lines: records,
        k_ref: *k_ref,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn association_prefers_aligned_slots() {
        let track = [Vec3::unit(0), Vec3::unit(1), Vec3::unit(2)];
        let dirs = [Vec3::unit(2), Vec3::unit(0), Vec3::unit(1)];
        let perm = associate(&track, &dirs, &[true; 3]);
        assert_eq!(perm, [1, 2, 0]);
        assert_eq!(perm.map(|o| dirs[o]), track);
    }

    #[test]
    fn association_is_sign_invariant() {
        let track = [Vec3::unit(0), Vec3::unit(1), Vec3::unit(2)];
        let dirs = [-Vec3::unit(1), Vec3::unit(0), Vec3::unit(2)];
        assert_eq!(associate(&track, &dirs, &[true; 3]), [1, 0, 2]);
    }

    #[test]
    fn too_short_sequence() {
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let fl = FrameLines::new(0, 640, 480, vec![]).unwrap();
        let err = build_sequence("x", &[(fl, k)], Label::Real, &k, &SequenceConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::TooShort(1)));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("real".parse::<Label>().unwrap(), Label::Real);
        assert_eq!("generated".parse::<Label>().unwrap(), Label::Generated);
        assert!("other".parse::<Label>().is_err());
    }
}
