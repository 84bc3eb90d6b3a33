//! Sequential RANSAC estimation of up to three orthogonal vanishing points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::camera::Intrinsics;
use crate::geometry::lines::FrameLines;
use crate::linalg::{symmetric_eigen, Mat3, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpConfig {
    /// Hypotheses drawn per vanishing point.
    pub iterations: usize,
    /// Max angle between a segment and the ray from its midpoint to the VP.
    pub inlier_tol_deg: f64,
    /// Max deviation from 90 degrees between calibrated directions.
    pub orth_tol_deg: f64,
    /// Inliers needed for a vanishing point to count as visible.
    pub min_support: usize,
    pub seed: u64,
}

impl Default for VpConfig {
    fn default() -> Self {
        VpConfig {
            iterations: 500,
            inlier_tol_deg: 2.0,
            orth_tol_deg: 10.0,
            min_support: 5,
            seed: 0,
        }
    }
}

/// Three vanishing points of one frame, in detection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingPointEstimate<T> {
    /// Pixel coordinates per VP; zero when invisible.
    pub vp2d: [[T; 2]; 3],
    /// Unit calibrated direction per VP (sign-canonical); zero when invisible.
    pub vp3d: [Vec3<T>; 3],
    /// Diagonal-normalized distance outside the image rectangle.
    pub outside: [T; 3],
    pub visible: [bool; 3],
    /// Per segment: index of the VP it supports.
    pub assignments: Vec<Option<usize>>,
}

impl<T: Scalar> VanishingPointEstimate<T> {
    pub fn invisible(num_segments: usize) -> Self {
        VanishingPointEstimate {
            vp2d: [[T::zero(); 2]; 3],
            vp3d: [Vec3::zero(); 3],
            outside: [T::zero(); 3],
            visible: [false; 3],
            assignments: vec![None; num_segments],
        }
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    /// Reorders the VP slots: new slot `i` takes old slot `perm[i]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let mut inverse = [0usize; 3];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        VanishingPointEstimate {
            vp2d: perm.map(|o| self.vp2d[o]),
            vp3d: perm.map(|o| self.vp3d[o]),
            outside: perm.map(|o| self.outside[o]),
            visible: perm.map(|o| self.visible[o]),
            assignments: self
                .assignments
                .iter()
                .map(|a| a.map(|o| inverse[o]))
                .collect(),
        }
    }
}

/// Euclidean distance from `p` to the `[0, width] x [0, height]` rectangle over the diagonal.
pub fn outside_distance<T: Scalar>(p: [T; 2], width: T, height: T) -> T {
    let dx = (-p[0]).max(p[0] - width).max(T::zero());
    let dy = (-p[1]).max(p[1] - height).max(T::zero());
    (dx * dx + dy * dy).sqrt() / (width * width + height * height).sqrt()
}

struct Prepared<T> {
    line: Vec3<T>,
    mid: [T; 2],
    dir: [T; 2],
    /// Interpretation-plane normal `K^T l`, unit length.
    normal: Vec3<T>,
}

fn is_inlier<T: Scalar>(seg: &Prepared<T>, vp: &Vec3<T>, sin_tol: T) -> bool {
    // ray from the midpoint toward a homogeneous VP, valid at infinity too
    let rx = vp.x() - vp.z() * seg.mid[0];
    let ry = vp.y() - vp.z() * seg.mid[1];
    let rn = (rx * rx + ry * ry).sqrt();
    if rn == T::zero() || !rn.is_finite() {
        return false;
    }
    (seg.dir[0] * ry - seg.dir[1] * rx).abs() <= sin_tol * rn
}

/// Least-squares direction: the unit `d` minimizing `sum (n_k . d)^2`.
fn refine_direction<T: Scalar>(segs: &[Prepared<T>], inliers: &[usize]) -> Option<Vec3<T>> {
    if inliers.len() < 2 {
        return None;
    }
    let mut m = Mat3::<T>::zero();
    for &i in inliers {
        let n = segs[i].normal;
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = m.0[r][c] + n[r] * n[c];
            }
        }
    }
    let (_, vecs) = symmetric_eigen(&m);
    vecs[0].normalized()
}

/// Estimates up to three mutually orthogonal vanishing points.
pub fn estimate_vanishing_points<T: Scalar>(
    lines: &FrameLines<T>,
    k: &Intrinsics<T>,
    cfg: &VpConfig,
) -> Result<VanishingPointEstimate<T>> {
    if lines.segments.is_empty() {
        return Err(Error::NoLines);
    }
    k.validate()?;
    let k_mat = k.matrix();
    let k_inv = k.inverse_matrix();
    let kt = k_mat.transpose();
    let segs: Vec<Prepared<T>> = lines
        .segments
        .iter()
        .map(|s| {
            let line = s.homogeneous();
            Prepared {
                line,
                mid: s.midpoint(),
                dir: s.direction(),
                normal: kt.mul_vec(&line).normalized().unwrap_or(Vec3::zero()),
            }
        })
        .collect();

    let sin_tol = T::lit(cfg.inlier_tol_deg.to_radians().sin());
    let sin_orth = T::lit(cfg.orth_tol_deg.to_radians().sin());
    let width = T::from_usize_lossy(lines.width);
    let height = T::from_usize_lossy(lines.height);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut out = VanishingPointEstimate::invisible(segs.len());
    let mut remaining: Vec<usize> = (0..segs.len()).collect();
    let mut accepted: Vec<Vec3<T>> = Vec::new();

    let orthogonal_to_accepted =
        |d: &Vec3<T>, acc: &[Vec3<T>]| acc.iter().all(|a| a.dot(d).abs() <= sin_orth);
    let inliers_of = |vp: &Vec3<T>, pool: &[usize]| -> Vec<usize> {
        pool.iter()
            .copied()
            .filter(|&i| is_inlier(&segs[i], vp, sin_tol))
            .collect()
    };

    for slot in 0..3 {
        if remaining.len() < 2 {
            break;
        }
        let mut best: Option<Vec<usize>> = None;
        for _ in 0..cfg.iterations {
            let a = remaining[rng.random_range(0..remaining.len())];
            let b = remaining[rng.random_range(0..remaining.len())];
            if a == b {
                continue;
            }
            let vp = segs[a].line.cross(&segs[b].line);
            let Some(dir) = k_inv.mul_vec(&vp).normalized() else {
                continue;
            };
            if !orthogonal_to_accepted(&dir, &accepted) {
                continue;
            }
            let inl = inliers_of(&vp, &remaining);
            if best.as_ref().is_none_or(|b| inl.len() > b.len()) {
                best = Some(inl);
            }
        }
        let Some(mut inliers) = best else {
            break;
        };
        // refine on the consensus set, then re-collect inliers around the refined VP
        let mut dir = match refine_direction(&segs, &inliers) {
            Some(d) => d,
            None => break,
        };
        for _ in 0..2 {
            let vp = k_mat.mul_vec(&dir);
            let again = inliers_of(&vp, &remaining);
            if again.len() < inliers.len() || again.len() < 2 {
                break;
            }
            inliers = again;
            match refine_direction(&segs, &inliers) {
                Some(d) => dir = d,
                None => break,
            }
        }
        if inliers.len() < cfg.min_support {
            break;
        }
        let dir = dir.sign_canonical();
        let vp_h = k_mat.mul_vec(&dir);
        let w = if vp_h.z().abs() < T::lit(1e-12) {
            T::lit(1e-12).copysign(vp_h.z())
        } else {
            vp_h.z()
        };
        let p = [vp_h.x() / w, vp_h.y() / w];
        out.vp2d[slot] = p;
        out.vp3d[slot] = dir;
        out.outside[slot] = outside_distance(p, width, height);
        out.visible[slot] = true;
        for &i in &inliers {
            out.assignments[i] = Some(slot);
        }
        accepted.push(dir);
        remaining.retain(|i| out.assignments[*i].is_none());
    }
    Ok(out)
}
