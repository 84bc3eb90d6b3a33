//! Minimal line rasterizer for rendering test images.

use crate::geometry::camera::Intrinsics;
use crate::geometry::hough::GrayImage;
use crate::geometry::lines::{point_segment_distance, LineSegment};
use crate::linalg::{Mat3, Vec3};
use crate::synthworld::render::project_segment;

/// Draws dark anti-aliased strokes of half-width `radius` on a white canvas.
pub fn rasterize_segments(
    width: usize,
    height: usize,
    segments: &[LineSegment<f64>],
    radius: f64,
) -> GrayImage {
    let mut img = GrayImage::filled(width, height, 1.0);
    for s in segments {
        let pad = radius + 1.0;
        let x0 = (s.p1[0].min(s.p2[0]) - pad).floor().max(0.0) as usize;
        let x1 = ((s.p1[0].max(s.p2[0]) + pad).ceil() as usize).min(width.saturating_sub(1));
        let y0 = (s.p1[1].min(s.p2[1]) - pad).floor().max(0.0) as usize;
        let y1 = ((s.p1[1].max(s.p2[1]) + pad).ceil() as usize).min(height.saturating_sub(1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = point_segment_distance(s, [x as f64 + 0.5, y as f64 + 0.5]);
                let coverage = (radius + 0.5 - d).clamp(0.0, 1.0) as f32;
                if coverage > 0.0 {
                    let v = img.get(x, y).min(1.0 - coverage);
                    img.set(x, y, v);
                }
            }
        }
    }
    img
}

/// The twelve edges of an axis-aligned cube.
pub fn cube_edges(center: Vec3<f64>, side: f64) -> Vec<(Vec3<f64>, Vec3<f64>)> {
    let h = side / 2.0;
    let corner = |i: usize| {
        Vec3::new(
            center.x() + if i & 1 == 1 { h } else { -h },
            center.y() + if i & 2 == 2 { h } else { -h },
            center.z() + if i & 4 == 4 { h } else { -h },
        )
    };
    let mut edges = Vec::with_capacity(12);
    for i in 0..8usize {
        for bit in [1usize, 2, 4] {
            if i & bit == 0 {
                edges.push((corner(i), corner(i | bit)));
            }
        }
    }
    edges
}

/// Projected cube edges and the rendered image.
pub fn render_wireframe_cube(
    center: Vec3<f64>,
    side: f64,
    rotation: &Mat3<f64>,
    position: &Vec3<f64>,
    k: &Intrinsics<f64>,
    size: (usize, usize),
) -> (Vec<LineSegment<f64>>, GrayImage) {
    let edges: Vec<LineSegment<f64>> = cube_edges(center, side)
        .iter()
        .filter_map(|(a, b)| project_segment(a, b, rotation, position, k, size.0, size.1))
        .collect();
    let img = rasterize_segments(size.0, size.1, &edges, 0.75);
    (edges, img)
}
