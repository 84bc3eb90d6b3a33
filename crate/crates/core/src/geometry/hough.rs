//! Line segment detection: Sobel edge map, progressive probabilistic Hough
//! voting and merging of collinear fragments.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::lines::{FrameLines, LineSegment, MIN_SEGMENT_LENGTH};

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Loads any PNG or PNM (PGM) file as luminance.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_luma32f();
        Ok(GrayImage {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .ok_or_else(|| Error::InvalidArgument("image buffer size".into()))?;
        buf.save(path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoughConfig {
    /// Edge threshold as a fraction of the maximum gradient magnitude.
    pub edge_threshold: f32,
    pub theta_bins: usize,
    pub vote_threshold: u32,
    pub min_length: f64,
    /// Largest run of missing edge pixels bridged while tracing a segment.
    pub max_gap: usize,
    pub merge_angle_deg: f64,
    pub merge_distance: f64,
    pub merge_gap: f64,
    pub seed: u64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        HoughConfig {
            edge_threshold: 0.1,
            theta_bins: 180,
            vote_threshold: 15,
            min_length: MIN_SEGMENT_LENGTH,
            max_gap: 3,
            merge_angle_deg: 2.0,
            merge_distance: 4.0,
            merge_gap: 6.0,
            seed: 0,
        }
    }
}

/// Thinned Sobel edges with the gradient kept for orientation checks.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
}

impl EdgeMap {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Whether the gradient at pixel `i` is within `cos_tol` of the normal `n`.
    fn aligned(&self, i: usize, n: (f64, f64), cos_tol: f64) -> bool {
        let (gx, gy) = (self.gx[i] as f64, self.gy[i] as f64);
        (gx * n.0 + gy * n.1).abs() >= cos_tol * (gx * gx + gy * gy).sqrt()
    }
}

/// Sobel magnitude above `rel_threshold` of the maximum that is also a local
/// maximum across the gradient direction.
pub fn edge_map(img: &GrayImage, rel_threshold: f32) -> EdgeMap {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    let mut mag = vec![0f32; w * h];
    let mut max_mag = 0f32;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let p = |dx: isize, dy: isize| {
                img.get((x as isize + dx) as usize, (y as isize + dy) as usize)
            };
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y * w + x;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = (sx * sx + sy * sy).sqrt();
            max_mag = max_mag.max(mag[i]);
        }
    }
    let mut mask = vec![false; w * h];
    if max_mag > 0.0 {
        let thr = rel_threshold * max_mag;
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                let i = y * w + x;
                if mag[i] < thr {
                    continue;
                }
                // quantized gradient direction -> neighbor offsets across the edge
                let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
                let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                    (1, 0)
                } else if angle < 67.5 {
                    (1, 1)
                } else if angle < 112.5 {
                    (0, 1)
                } else {
                    (-1, 1)
                };
                let a = mag[((y as isize + dy) as usize) * w + (x as isize + dx) as usize];
                let b = mag[((y as isize - dy) as usize) * w + (x as isize - dx) as usize];
                mask[i] = mag[i] >= a && mag[i] > b;
            }
        }
    }
    EdgeMap {
        width: w,
        height: h,
        mask,
        gx,
        gy,
    }
}

struct Accumulator {
    bins: Vec<u32>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rho_offset: f64,
    rho_bins: usize,
}

impl Accumulator {
    fn new(theta_bins: usize, diag: f64) -> Self {
        let rho_bins = (2.0 * diag).ceil() as usize + 3;
        let (sin, cos) = (0..theta_bins)
            .map(|t| (std::f64::consts::PI * t as f64 / theta_bins as f64).sin_cos())
            .unzip();
        Accumulator {
            bins: vec![0; theta_bins * rho_bins],
            cos,
            sin,
            rho_offset: diag + 1.0,
            rho_bins,
        }
    }

    fn rho_bin(&self, t: usize, x: usize, y: usize) -> usize {
        let rho = x as f64 * self.cos[t] + y as f64 * self.sin[t];
        (rho + self.rho_offset).round() as usize
    }

    /// Adds the point's votes; returns the best `(count, theta)` among them.
    fn vote(&mut self, x: usize, y: usize) -> (u32, usize) {
        let mut best = (0, 0);
        for t in 0..self.cos.len() {
            let idx = t * self.rho_bins + self.rho_bin(t, x, y);
            self.bins[idx] += 1;
            if self.bins[idx] > best.0 {
                best = (self.bins[idx], t);
            }
        }
        best
    }

    fn unvote(&mut self, x: usize, y: usize) {
        for t in 0..self.cos.len() {
            let idx = t * self.rho_bins + self.rho_bin(t, x, y);
            self.bins[idx] = self.bins[idx].saturating_sub(1);
        }
    }
}

/// Gradient alignment needed for a pixel to support a traced line.
const ALIGN_COS: f64 = 0.92;

/// Walks both ways from `origin` along unit direction `dir`, collecting
/// available aligned edge pixels within one pixel across the line and
/// stopping after more than `max_gap` empty steps.
fn trace(
    edges: &EdgeMap,
    mask: &[bool],
    origin: (f64, f64),
    dir: (f64, f64),
    max_gap: usize,
) -> Vec<usize> {
    let (w, h) = (edges.width as isize, edges.height as isize);
    let normal = (-dir.1, dir.0);
    let major = dir.0.abs().max(dir.1.abs());
    let step = (dir.0 / major, dir.1 / major);
    let perp: (isize, isize) = if dir.0.abs() >= dir.1.abs() {
        (0, 1)
    } else {
        (1, 0)
    };
    let mut hits = Vec::new();
    let probe = |fx: f64, fy: f64, hits: &mut Vec<usize>| -> bool {
        let (ix, iy) = (fx.round() as isize, fy.round() as isize);
        let mut any = false;
        for o in -1..=1 {
            let (qx, qy) = (ix + o * perp.0, iy + o * perp.1);
            if qx < 0 || qy < 0 || qx >= w || qy >= h {
                continue;
            }
            let q = (qy * w + qx) as usize;
            if mask[q] && edges.aligned(q, normal, ALIGN_COS) {
                if !hits.contains(&q) {
                    hits.push(q);
                }
                any = true;
            }
        }
        any
    };
    probe(origin.0, origin.1, &mut hits);
    for sign in [1.0f64, -1.0] {
        let (mut fx, mut fy) = origin;
        let mut gap = 0;
        loop {
            fx += sign * step.0;
            fy += sign * step.1;
            if fx < -0.5 || fy < -0.5 || fx > w as f64 - 0.5 || fy > h as f64 - 0.5 {
                break;
            }
            if probe(fx, fy, &mut hits) {
                gap = 0;
            } else {
                gap += 1;
                if gap > max_gap {
                    break;
                }
            }
        }
    }
    hits
}

/// Total-least-squares line through pixel centers: centroid and unit direction.
fn fit_line(pixels: &[usize], width: usize) -> Option<((f64, f64), (f64, f64))> {
    if pixels.len() < 2 {
        return None;
    }
    let n = pixels.len() as f64;
    let pts: Vec<(f64, f64)> = pixels
        .iter()
        .map(|&q| ((q % width) as f64, (q / width) as f64))
        .collect();
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - cx) * (x - cx);
        syy += (y - cy) * (y - cy);
        sxy += (x - cx) * (y - cy);
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(((cx, cy), (angle.cos(), angle.sin())))
}

/// Progressive probabilistic Hough transform: random edge pixels vote until a
/// bin reaches the threshold, then the line is traced, refit and its pixels
/// removed from the accumulator.
pub fn probabilistic_hough(edges: &EdgeMap, cfg: &HoughConfig) -> Vec<LineSegment<f64>> {
    let (width, height) = (edges.width, edges.height);
    let diag = ((width * width + height * height) as f64).sqrt();
    let mut acc = Accumulator::new(cfg.theta_bins.max(1), diag);
    let mut mask = edges.mask.clone();
    let mut voted = vec![false; mask.len()];
    let mut points: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    points.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut out = Vec::new();
    for &p in &points {
        if !mask[p] {
            continue;
        }
        let (px, py) = (p % width, p / width);
        let (count, t) = acc.vote(px, py);
        voted[p] = true;
        if count < cfg.vote_threshold {
            continue;
        }
        let mut hits = trace(
            edges,
            &mask,
            (px as f64, py as f64),
            (-acc.sin[t], acc.cos[t]),
            cfg.max_gap,
        );
        let mut line = fit_line(&hits, width);
        // retrace along the refined line once
        if let Some((c, d)) = line {
            let again = trace(edges, &mask, c, d, cfg.max_gap);
            if again.len() >= hits.len() {
                hits = again;
                line = fit_line(&hits, width).or(line);
            }
        }
        let Some(((cx, cy), (dx, dy))) = line else {
            continue;
        };
        let proj = |q: usize| ((q % width) as f64 - cx) * dx + ((q / width) as f64 - cy) * dy;
        let (t0, t1) = hits
            .iter()
            .map(|&q| proj(q))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        let seg = LineSegment::new([cx + t0 * dx, cy + t0 * dy], [cx + t1 * dx, cy + t1 * dy]);
        if seg.length() < cfg.min_length {
            continue;
        }
        for &q in &hits {
            mask[q] = false;
            if voted[q] {
                acc.unvote(q % width, q / width);
                voted[q] = false;
            }
        }
        out.push(seg);
    }
    out
}

/// Merges nearly collinear, overlapping or nearly touching segments until stable.
pub fn merge_collinear(
    mut segs: Vec<LineSegment<f64>>,
    cfg: &HoughConfig,
) -> Vec<LineSegment<f64>> {
    let cos_tol = cfg.merge_angle_deg.to_radians().cos();
    loop {
        let mut merged_any = false;
        'outer: for i in 0..segs.len() {
            for j in (i + 1)..segs.len() {
                if let Some(m) = try_merge(
                    &segs[i],
                    &segs[j],
                    cos_tol,
                    cfg.merge_distance,
                    cfg.merge_gap,
                ) {
                    segs[i] = m;
                    segs.swap_remove(j);
                    merged_any = true;
                    break 'outer;
                }
            }
        }
        if !merged_any {
            return segs;
        }
    }
}

fn try_merge(
    a: &LineSegment<f64>,
    b: &LineSegment<f64>,
    cos_tol: f64,
    max_dist: f64,
    max_gap: f64,
) -> Option<LineSegment<f64>> {
    let (long, short) = if a.length() >= b.length() {
        (a, b)
    } else {
        (b, a)
    };
    let u = long.direction();
    let v = short.direction();
    let aligned = (u[0] * v[0] + u[1] * v[1]).abs() >= cos_tol;
    let n = [-u[1], u[0]];
    let o = long.p1;
    let proj = |p: [f64; 2]| {
        let d = [p[0] - o[0], p[1] - o[1]];
        (d[0] * u[0] + d[1] * u[1], d[0] * n[0] + d[1] * n[1])
    };
    let (t1, s1) = proj(short.p1);
    let (t2, s2) = proj(short.p2);
    if s1.abs() > max_dist || s2.abs() > max_dist {
        return None;
    }
    let long_len = long.length();
    let (smin, smax) = (t1.min(t2), t1.max(t2));
    if !aligned {
        // a short fragment lying inside the band of a much longer segment is
        // absorbed; its own orientation is too unreliable to compare
        let inside = smin >= -max_dist && smax <= long_len + max_dist;
        return (inside && short.length() <= 0.5 * long_len).then_some(*long);
    }
    let gap = (smin - long_len).max(0.0).max(-smax);
    if gap > max_gap {
        return None;
    }
    let offset = short.length() * 0.5 * (s1 + s2) / (long_len + short.length());
    let tmin = smin.min(0.0);
    let tmax = smax.max(long_len);
    let at = |t: f64| {
        [
            o[0] + t * u[0] + offset * n[0],
            o[1] + t * u[1] + offset * n[1],
        ]
    };
    Some(LineSegment::new(at(tmin), at(tmax)))
}

/// Bilinear sample at pixel-index coordinates, clamped to the image.
fn sample(img: &GrayImage, x: f64, y: f64) -> f64 {
    let xm = (img.width - 1) as f64;
    let ym = (img.height - 1) as f64;
    let (x, y) = (x.clamp(0.0, xm), y.clamp(0.0, ym));
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let v = |xx: usize, yy: usize| img.get(xx, yy) as f64;
    (1.0 - fy) * ((1.0 - fx) * v(x0, y0) + fx * v(x1, y0))
        + fy * ((1.0 - fx) * v(x0, y1) + fx * v(x1, y1))
}

/// Perpendicular offset used to compare a line sample with its surroundings.
const SIDE_OFFSET: f64 = 3.0;
const ENDPOINT_STEP: f64 = 0.25;

/// Re-centers a segment on a thin stroke: at 20% and 80% of its length, shifts
/// across the line to where the center contrasts most with both sides. Step
/// edges have no such extremum and are left unchanged.
fn recenter_on_stroke(img: &GrayImage, seg: &LineSegment<f64>, contrast: f64) -> LineSegment<f64> {
    let u = seg.direction();
    let n = [-u[1], u[0]];
    let len = seg.length();
    let point = |t: f64, o: f64| {
        [
            seg.p1[0] + t * u[0] + o * n[0],
            seg.p1[1] + t * u[1] + o * n[1],
        ]
    };
    let ridge = |t: f64, o: f64| {
        (-2..=2)
            .map(|j| {
                let p = point(t + j as f64, o);
                let c = sample(img, p[0], p[1]);
                let a = sample(img, p[0] + SIDE_OFFSET * n[0], p[1] + SIDE_OFFSET * n[1]);
                let b = sample(img, p[0] - SIDE_OFFSET * n[0], p[1] - SIDE_OFFSET * n[1]);
                0.5 * (a + b) - c
            })
            .sum::<f64>()
            / 5.0
    };
    let mut anchors = Vec::with_capacity(2);
    for f in [0.2, 0.8] {
        let t = f * len;
        let best = (-16..=16)
            .map(|k| k as f64 * 0.125)
            .map(|o| (ridge(t, o).abs(), o))
            .fold(
                (f64::NEG_INFINITY, 0.0),
                |a, b| if b.0 > a.0 { b } else { a },
            );
        if best.0 <= contrast {
            return *seg;
        }
        anchors.push(point(t, best.1));
    }
    let (a, b) = (anchors[0], anchors[1]);
    let line = LineSegment::new(a, b);
    let v = line.direction();
    let onto = |p: [f64; 2]| {
        let t = (p[0] - a[0]) * v[0] + (p[1] - a[1]) * v[1];
        [a[0] + t * v[0], a[1] + t * v[1]]
    };
    LineSegment::new(onto(seg.p1), onto(seg.p2))
}

/// Moves each endpoint along the segment to the end of the contiguous run where
/// the center intensity stays close to its interior level. The reference is
/// the contrast between the interior center and either side, so neighbouring
/// strokes at junctions do not interfere.
fn refine_endpoints(
    img: &GrayImage,
    seg: &LineSegment<f64>,
    contrast: f64,
    reach: f64,
) -> LineSegment<f64> {
    let u = seg.direction();
    let n = [-u[1], u[0]];
    let at_frac = |f: f64| {
        [
            seg.p1[0] + f * (seg.p2[0] - seg.p1[0]),
            seg.p1[1] + f * (seg.p2[1] - seg.p1[1]),
        ]
    };
    let interior: Vec<[f64; 2]> = (1..10).map(|i| at_frac(i as f64 / 10.0)).collect();
    let center = interior
        .iter()
        .map(|p| sample(img, p[0], p[1]))
        .sum::<f64>()
        / 9.0;
    let sides = [1.0, -1.0].map(|s| {
        interior
            .iter()
            .map(|p| {
                sample(
                    img,
                    p[0] + s * SIDE_OFFSET * n[0],
                    p[1] + s * SIDE_OFFSET * n[1],
                )
            })
            .sum::<f64>()
            / 9.0
    });
    if sides.iter().all(|l| (l - center).abs() <= contrast) {
        return *seg;
    }
    let present = |p: [f64; 2]| {
        let c = sample(img, p[0], p[1]);
        sides.iter().any(|&l| {
            let scale = (l - center).abs();
            scale > contrast && (0.7..=1.3).contains(&((l - c) / (l - center)))
        })
    };
    let at = |o: [f64; 2], sign: f64, t: f64| [o[0] + sign * t * u[0], o[1] + sign * t * u[1]];
    let len = seg.length();
    let mut ends = [seg.p1, seg.p2];
    for (k, sign) in [(0usize, -1.0f64), (1, 1.0)] {
        let o = ends[k];
        let steps = (reach / ENDPOINT_STEP) as usize;
        if present(o) {
            let mut last = 0.0;
            for i in 1..=steps {
                let t = i as f64 * ENDPOINT_STEP;
                if !present(at(o, sign, t)) {
                    break;
                }
                last = t;
            }
            ends[k] = at(o, sign, last);
        } else {
            // trim inward, never past the middle
            let max_in = ((reach.min(len / 2.0)) / ENDPOINT_STEP) as usize;
            for i in 1..=max_in {
                let p = at(o, -sign, i as f64 * ENDPOINT_STEP);
                if present(p) {
                    ends[k] = p;
                    break;
                }
            }
        }
    }
    LineSegment::new(ends[0], ends[1])
}

/// Detects line segments in a grayscale frame.
/// Moves endpoints that meet another segment's endpoint onto the intersection of the two lines.
fn snap_junctions(segs: &[LineSegment<f64>], radius: f64) -> Vec<LineSegment<f64>> {
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut out = segs.to_vec();
    for (i, a) in segs.iter().enumerate() {
        for (j, b) in segs.iter().enumerate() {
            if i == j {
                continue;
            }
            let da = [a.p2[0] - a.p1[0], a.p2[1] - a.p1[1]];
            let db = [b.p2[0] - b.p1[0], b.p2[1] - b.p1[1]];
            let cross = da[0] * db[1] - da[1] * db[0];
            if cross.abs() < 0.1 * a.length() * b.length() {
                continue;
            }
            let w = [b.p1[0] - a.p1[0], b.p1[1] - a.p1[1]];
            let t = (w[0] * db[1] - w[1] * db[0]) / cross;
            let x = [a.p1[0] + t * da[0], a.p1[1] + t * da[1]];
            if dist(x, b.p1).min(dist(x, b.p2)) > radius {
                continue;
            }
            if dist(a.p1, x) <= radius && dist(a.p1, x) < dist(a.p2, x) {
                out[i].p1 = x;
            } else if dist(a.p2, x) <= radius && dist(a.p2, x) < dist(a.p1, x) {
                out[i].p2 = x;
            }
        }
    }
    out
}

pub fn detect_line_segments(
    img: &GrayImage,
    frame_index: usize,
    cfg: &HoughConfig,
) -> Result<FrameLines<f64>> {
    if img.width < 64 || img.height < 64 {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
        });
    }
    let edges = edge_map(img, cfg.edge_threshold);
    let raw = probabilistic_hough(&edges, cfg);
    let (w, h) = (img.width as f64, img.height as f64);
    let (lo, hi) = img
        .data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let contrast = 0.25 * (hi - lo) as f64;
    let reach = 2.0 * cfg.max_gap as f64 + 2.0;
    let refined: Vec<_> = merge_collinear(raw, cfg)
        .into_iter()
        .map(|s| refine_endpoints(img, &recenter_on_stroke(img, &s, contrast), contrast, reach))
        .collect();
    let segments = snap_junctions(&refined, reach)
        .into_iter()
        .map(|s| {
            // pixel (i, j) covers [i, i + 1) x [j, j + 1)
            let c = |p: [f64; 2]| [(p[0] + 0.5).clamp(0.0, w), (p[1] + 0.5).clamp(0.0, h)];
            LineSegment::new(c(s.p1), c(s.p2))
        })
        .filter(|s| s.length() >= cfg.min_length)
        .collect();
    FrameLines::new(frame_index, img.width, img.height, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_image_has_no_segments() {
        let img = GrayImage::filled(128, 96, 0.5);
        let fl = detect_line_segments(&img, 0, &HoughConfig::default()).unwrap();
        assert!(fl.segments.is_empty());
    }

    #[test]
    fn too_small_is_rejected() {
        let img = GrayImage::filled(63, 100, 0.5);
        assert!(matches!(
            detect_line_segments(&img, 0, &HoughConfig::default()),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn horizontal_bar_gives_one_horizontal_segment() {
        let mut img = GrayImage::filled(160, 120, 1.0);
        for y in 59..61 {
            for x in 20..140 {
                img.set(x, y, 0.0);
            }
        }
        let fl = detect_line_segments(&img, 0, &HoughConfig::default()).unwrap();
        assert_eq!(fl.segments.len(), 1, "{:?}", fl.segments);
        let s = fl.segments[0];
        let ang = s.orientation().to_degrees();
        assert!(ang.min(180.0 - ang) < 1.0, "orientation {ang}");
        assert!(s.length() > 100.0);
    }

    #[test]
    fn merge_joins_parallel_ridges() {
        let a = LineSegment::new([10.0, 50.0], [100.0, 50.0]);
        let b = LineSegment::new([12.0, 52.0], [98.0, 52.0]);
        let m = merge_collinear(vec![a, b], &HoughConfig::default());
        assert_eq!(m.len(), 1);
        assert!((m[0].p1[1] - 51.0).abs() < 0.1);
        let far = LineSegment::new([10.0, 70.0], [100.0, 70.0]);
        assert_eq!(
            merge_collinear(vec![a, far], &HoughConfig::default()).len(),
            2
        );
    }
}
