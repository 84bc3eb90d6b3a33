//! Geometry-head losses and the classification loss.
//!
//! Each geometry loss exists twice: a plain function over direction triples
//! and a tape version used for training. Both follow the same definitions.

use crate::error::Result;
use crate::geometry::camera::Intrinsics;
use crate::geometry::features::FrameRecord;
use crate::geometry::lines::point_line_distance;
use crate::linalg::Vec3;
use crate::model::temporal::{first_difference_matrix, Directions};
use crate::numerics::tape::PROJECTION_MIN_DEPTH;
use crate::numerics::{Tape, Tensor, Var};

fn project(u: &Vec3<f64>, k: &Intrinsics<f64>) -> Option<[f64; 2]> {
    if u.z().abs() < PROJECTION_MIN_DEPTH {
        return None;
    }
    Some([k.fx * u.x() / u.z() + k.cx, k.fy * u.y() / u.z() + k.cy])
}

/// `sum ||pi(u_i^t) - v_i^t||^2` over visible, projectable directions.
pub fn reprojection_loss(
    u: &[Directions<f64>],
    vp2d: &[[[f64; 2]; 3]],
    visible: &[[bool; 3]],
    k: &Intrinsics<f64>,
) -> f64 {
    let mut s = 0.0;
    for t in 0..u.len() {
        for i in 0..3 {
            if !visible[t][i] {
                continue;
            }
            if let Some(p) = project(&u[t][i], k) {
                s += (p[0] - vp2d[t][i][0]).powi(2) + (p[1] - vp2d[t][i][1]).powi(2);
            }
        }
    }
    s
}

/// `sum_{t >= 1} sum_i ||u_i^t - u_i^{t-1}||^2`.
pub fn temporal_loss(u: &[Directions<f64>]) -> f64 {
    u.windows(2)
        .map(|w| (0..3).map(|i| (w[1][i] - w[0][i]).norm_sq()).sum::<f64>())
        .sum()
}

/// Sum of distances from each assigned segment's line to the projection of its VP prediction.
pub fn line_loss(u: &[Directions<f64>], records: &[FrameRecord], k: &Intrinsics<f64>) -> f64 {
    let mut s = 0.0;
    for (t, rec) in records.iter().enumerate().take(u.len()) {
        for k_idx in 0..rec.segments.len() {
            let Some(i) = rec.assignment(k_idx) else {
                continue;
            };
            if let Some(p) = project(&u[t][i], k) {
                s += point_line_distance(&rec.segment(k_idx).homogeneous(), p);
            }
        }
    }
    s
}

fn intrinsics_array(k: &Intrinsics<f64>) -> [f64; 4] {
    [k.fx, k.fy, k.cx, k.cy]
}

fn zero(tape: &mut Tape) -> Result<Var> {
    tape.constant(Tensor::scalar(0.0))
}

/// Tape version of [`reprojection_loss`]; `u` is `[T, 9]`.
pub fn reprojection_loss_on(
    tape: &mut Tape,
    u: Var,
    records: &[FrameRecord],
    k: &Intrinsics<f64>,
) -> Result<Var> {
    let p = tape.project(u, intrinsics_array(k))?;
    let t = tape.value(p).rows();
    let valid = tape.projectable(p).expect("projection node").to_vec();
    let mut target = Tensor::zeros(t, 6);
    let mut mask = Tensor::zeros(t, 6);
    for (r, rec) in records.iter().enumerate().take(t) {
        for i in 0..3 {
            if rec.visible[i] && valid[3 * r + i] {
                for c in 0..2 {
                    target.set(r, 2 * i + c, rec.vp2d[i][c]);
                    mask.set(r, 2 * i + c, 1.0);
                }
            }
        }
    }
    let target = tape.constant(target)?;
    let mask = tape.constant(mask)?;
    let diff = tape.sub(p, target)?;
    let diff = tape.mul(diff, mask)?;
    let sq = tape.mul(diff, diff)?;
    tape.sum(sq)
}

/// Tape version of [`temporal_loss`].
pub fn temporal_loss_on(tape: &mut Tape, u: Var) -> Result<Var> {
    let t = tape.value(u).rows();
    let d = tape.constant(first_difference_matrix(t))?;
    let diff = tape.matmul(d, u)?;
    let sq = tape.mul(diff, diff)?;
    tape.sum(sq)
}

/// Tape version of [`line_loss`].
pub fn line_loss_on(
    tape: &mut Tape,
    u: Var,
    records: &[FrameRecord],
    k: &Intrinsics<f64>,
) -> Result<Var> {
    let p = tape.project(u, intrinsics_array(k))?;
    let t = tape.value(p).rows();
    let valid = tape.projectable(p).expect("projection node").to_vec();
    let (mut xi, mut yi) = (Vec::new(), Vec::new());
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (r, rec) in records.iter().enumerate().take(t) {
        for k_idx in 0..rec.segments.len() {
            let Some(i) = rec.assignment(k_idx) else {
                continue;
            };
            if !valid[3 * r + i] {
                continue;
            }
            let l = rec.segment(k_idx).homogeneous();
            let n = (l.x() * l.x() + l.y() * l.y()).sqrt();
            xi.push(r * 6 + 2 * i);
            yi.push(r * 6 + 2 * i + 1);
            a.push(l.x() / n);
            b.push(l.y() / n);
            c.push(l.z() / n);
        }
    }
    if xi.is_empty() {
        return zero(tape);
    }
    let n = xi.len();
    let px = tape.gather(p, &xi)?;
    let py = tape.gather(p, &yi)?;
    let a = tape.constant(Tensor::matrix(n, 1, a)?)?;
    let b = tape.constant(Tensor::matrix(n, 1, b)?)?;
    let c = tape.constant(Tensor::matrix(n, 1, c)?)?;
    let ax = tape.mul(px, a)?;
    let by = tape.mul(py, b)?;
    let s = tape.add(ax, by)?;
    let s = tape.add(s, c)?;
    let s = tape.abs(s)?;
    tape.sum(s)
}

/// Loss weights of the geometry-head objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryWeights {
    pub repj: f64,
    pub temp: f64,
    pub line: f64,
}

/// `w_repj L_repj + w_temp L_temp + w_line L_line` on the tape.
pub fn geometry_loss_on(
    tape: &mut Tape,
    u: Var,
    records: &[FrameRecord],
    k: &Intrinsics<f64>,
    w: GeometryWeights,
) -> Result<Var> {
    let repj = reprojection_loss_on(tape, u, records, k)?;
    let temp = temporal_loss_on(tape, u)?;
    let line = line_loss_on(tape, u, records, k)?;
    let repj = tape.scale(repj, w.repj)?;
    let temp = tape.scale(temp, w.temp)?;
    let line = tape.scale(line, w.line)?;
    let s = tape.add(repj, temp)?;
    tape.add(s, line)
}

/// Cross-entropy of `[1, 2]` logits against a label smoothed toward uniform.
pub fn smoothed_cross_entropy_on(
    tape: &mut Tape,
    logits: Var,
    class: usize,
    smoothing: f64,
) -> Result<Var> {
    let ls = tape.log_softmax(logits)?;
    let mut target = vec![smoothing / 2.0; 2];
    target[class] += 1.0 - smoothing;
    let target = tape.constant(Tensor::matrix(1, 2, target)?)?;
    let picked = tape.mul(ls, target)?;
    let s = tape.sum(picked)?;
    tape.scale(s, -1.0)
}
