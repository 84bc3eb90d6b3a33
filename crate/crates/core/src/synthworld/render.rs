//! Axis-aligned box rooms and their projected line segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::camera::Intrinsics;
use crate::geometry::lines::{FrameLines, LineSegment, MIN_SEGMENT_LENGTH};
use crate::linalg::{Mat3, Vec3};
use crate::synthworld::trajectory::JitterSpec;

/// Depth below which 3D segments are clipped away.
pub const NEAR_PLANE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Room extent `[x, y, z]` in meters; the room spans `[0, dims]`, `y` down.
    pub dims: [f64; 3],
    pub lines_per_axis: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            dims: [6.0, 3.0, 8.0],
            lines_per_axis: 40,
            seed: 0,
        }
    }
}

/// A 3D line segment parallel to one scene axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneLine {
    pub a: Vec3<f64>,
    pub b: Vec3<f64>,
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub dims: [f64; 3],
    pub lines: Vec<SceneLine>,
}

impl Scene {
    /// Places `lines_per_axis` segments per axis on the room faces parallel to that axis.
    pub fn build(spec: &SceneSpec) -> Result<Scene> {
        if spec.dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "room dimensions {:?}",
                spec.dims
            )));
        }
        if spec.lines_per_axis < 10 {
            return Err(Error::InvalidArgument(
                "need at least 10 lines per axis".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut lines = Vec::with_capacity(3 * spec.lines_per_axis);
        for axis in 0..3 {
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            for _ in 0..spec.lines_per_axis {
                let mut p = [0.0; 3];
                // a face containing the axis: one of b, c pinned to a wall
                let (pinned, free) = if rng.random_bool(0.5) { (b, c) } else { (c, b) };
                p[pinned] = if rng.random_bool(0.5) {
                    0.0
                } else {
                    spec.dims[pinned]
                };
                p[free] = rng.random_range(0.05..0.95) * spec.dims[free];
                let len = rng.random_range(0.3..0.9) * spec.dims[axis];
                let start = rng.random_range(0.0..(spec.dims[axis] - len));
                let mut q = p;
                p[axis] = start;
                q[axis] = start + len;
                lines.push(SceneLine {
                    a: Vec3(p),
                    b: Vec3(q),
                    axis,
                });
            }
        }
        Ok(Scene {
            dims: spec.dims,
            lines,
        })
    }

    pub fn contains(&self, p: &Vec3<f64>) -> bool {
        (0..3).all(|i| p[i] > 0.0 && p[i] < self.dims[i])
    }
}

/// Ground-truth scene axes in camera coordinates (rows of the camera-to-world
/// rotation), sign-canonical.
pub fn ground_truth_directions(rotation: &Mat3<f64>) -> [Vec3<f64>; 3] {
    [0, 1, 2].map(|i| rotation.row(i).sign_canonical())
}

fn clip_to_depth(a: Vec3<f64>, b: Vec3<f64>) -> Option<(Vec3<f64>, Vec3<f64>)> {
    let (za, zb) = (a.z(), b.z());
    if za < NEAR_PLANE && zb < NEAR_PLANE {
        return None;
    }
    let lerp = |s: f64| a + (b - a).scale(s);
    if za < NEAR_PLANE {
        Some((lerp((NEAR_PLANE - za) / (zb - za)), b))
    } else if zb < NEAR_PLANE {
        Some((a, lerp((NEAR_PLANE - za) / (zb - za))))
    } else {
        Some((a, b))
    }
}

/// Liang-Barsky clipping of a 2D segment to `[0, w] x [0, h]`.
pub fn clip_to_rect(p: [f64; 2], q: [f64; 2], w: f64, h: f64) -> Option<([f64; 2], [f64; 2])> {
    let d = [q[0] - p[0], q[1] - p[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (pk, qk) in [
        (-d[0], p[0]),
        (d[0], w - p[0]),
        (-d[1], p[1]),
        (d[1], h - p[1]),
    ] {
        if pk == 0.0 {
            if qk < 0.0 {
                return None;
            }
        } else {
            let r = qk / pk;
            if pk < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    Some((
        [p[0] + t0 * d[0], p[1] + t0 * d[1]],
        [p[0] + t1 * d[0], p[1] + t1 * d[1]],
    ))
}

/// Projects a world segment into the image, clipped to the near plane and frame.
pub fn project_segment(
    a: &Vec3<f64>,
    b: &Vec3<f64>,
    rotation: &Mat3<f64>,
    position: &Vec3<f64>,
    k: &Intrinsics<f64>,
    width: usize,
    height: usize,
) -> Option<LineSegment<f64>> {
    let rt = rotation.transpose();
    let (ca, cb) = clip_to_depth(rt.mul_vec(&(*a - *position)), rt.mul_vec(&(*b - *position)))?;
    let pa = k.project(&ca)?;
    let pb = k.project(&cb)?;
    let (p, q) = clip_to_rect(pa, pb, width as f64, height as f64)?;
    let seg = LineSegment::new(p, q);
    (seg.length() >= MIN_SEGMENT_LENGTH).then_some(seg)
}

/// A rendered frame: segments, the scene axis each came from, and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub lines: FrameLines<f64>,
    pub axes: Vec<usize>,
    pub gt_directions: [Vec3<f64>; 3],
}

/// Axis-aligned rectangle of `ratio` of the frame area at a random position.
pub fn mask_rectangle(rng: &mut ChaCha8Rng, ratio: f64, width: f64, height: f64) -> [f64; 4] {
    if ratio >= 1.0 {
        return [0.0, 0.0, width, height];
    }
    let area = ratio * width * height;
    let aspect: f64 = rng.random_range(0.75..1.333);
    let mut w = (area * aspect * width / height).sqrt();
    let mut h = area / w.max(1e-12);
    if w > width {
        w = width;
        h = area / width;
    }
    if h > height {
        h = height;
        w = area / height;
    }
    let x0 = rng.random_range(0.0..=(width - w).max(0.0));
    let y0 = rng.random_range(0.0..=(height - h).max(0.0));
    [x0, y0, x0 + w, y0 + h]
}

/// Renders the scene's line segments for one camera pose, then applies
/// endpoint noise, dropout and block masking from `spec`.
#[allow(clippy::too_many_arguments)]
pub fn render_line_segments(
    scene: &Scene,
    rotation: &Mat3<f64>,
    position: &Vec3<f64>,
    k: &Intrinsics<f64>,
    size: (usize, usize),
    spec: &JitterSpec,
    frame_index: usize,
    seed: u64,
) -> Result<RenderedFrame> {
    if !scene.contains(position) {
        return Err(Error::CameraOutsideScene);
    }
    k.validate()?;
    spec.validate()?;
    let (width, height) = size;
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension);
    }
    let (wf, hf) = (width as f64, height as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.sigma_px).expect("validated sigma");
    let rect = mask_rectangle(&mut rng, spec.mask_ratio, wf, hf);

    let mut segments = Vec::new();
    let mut axes = Vec::new();
    for line in &scene.lines {
        let Some(seg) = project_segment(&line.a, &line.b, rotation, position, k, width, height)
        else {
            continue;
        };
        let mut seg = seg;
        if spec.sigma_px > 0.0 {
            let mut jiggle = |p: [f64; 2]| {
                [
                    (p[0] + noise.sample(&mut rng)).clamp(0.0, wf),
                    (p[1] + noise.sample(&mut rng)).clamp(0.0, hf),
                ]
            };
            seg = LineSegment::new(jiggle(seg.p1), jiggle(seg.p2));
            if seg.length() < MIN_SEGMENT_LENGTH {
                continue;
            }
        }
        if spec.dropout > 0.0 && rng.random_bool(spec.dropout) {
            continue;
        }
        if spec.mask_ratio > 0.0 {
            let m = seg.midpoint();
            if m[0] >= rect[0] && m[0] <= rect[2] && m[1] >= rect[1] && m[1] <= rect[3] {
                continue;
            }
        }
        segments.push(seg);
        axes.push(line.axis);
    }
    Ok(RenderedFrame {
        lines: FrameLines::new(frame_index, width, height, segments)?,
        axes,
        gt_directions: ground_truth_directions(rotation),
    })
}
