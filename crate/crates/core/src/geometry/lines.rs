use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::Scalar;

/// Default minimum segment length in pixels.
pub const MIN_SEGMENT_LENGTH: f64 = 12.0;

/// An image line segment between two pixel endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment<T> {
    pub p1: [T; 2],
    pub p2: [T; 2],
}

impl<T: Scalar> LineSegment<T> {
    pub fn new(p1: [T; 2], p2: [T; 2]) -> Self {
        LineSegment { p1, p2 }
    }

    pub fn length(&self) -> T {
        let dx = self.p2[0] - self.p1[0];
        let dy = self.p2[1] - self.p1[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn midpoint(&self) -> [T; 2] {
        let h = T::lit(0.5);
        [(self.p1[0] + self.p2[0]) * h, (self.p1[1] + self.p2[1]) * h]
    }

    /// Unit direction from `p1` to `p2`.
    pub fn direction(&self) -> [T; 2] {
        let l = self.length();
        [(self.p2[0] - self.p1[0]) / l, (self.p2[1] - self.p1[1]) / l]
    }

    /// Homogeneous line `p1 x p2`.
    pub fn homogeneous(&self) -> Vec3<T> {
        let a = Vec3::new(self.p1[0], self.p1[1], T::one());
        let b = Vec3::new(self.p2[0], self.p2[1], T::one());
        a.cross(&b)
    }

    /// Orientation in `[0, pi)`.
    pub fn orientation(&self) -> T {
        let d = self.direction();
        let mut a = d[1].atan2(d[0]);
        if a < T::zero() {
            a = a + T::PI();
        }
        if a >= T::PI() {
            a = a - T::PI();
        }
        a
    }

    pub fn validate(&self, min_length: T) -> Result<()> {
        let finite = self.p1.iter().chain(&self.p2).all(|v| v.is_finite());
        if !finite || self.p1 == self.p2 {
            return Err(Error::InvalidSegment(format!(
                "degenerate endpoints {:?} {:?}",
                self.p1, self.p2
            )));
        }
        if self.length() < min_length {
            return Err(Error::InvalidSegment(format!(
                "length {:?} below minimum {:?}",
                self.length(),
                min_length
            )));
        }
        Ok(())
    }
}

/// Distance from a point to a homogeneous line `(a, b, c)`.
pub fn point_line_distance<T: Scalar>(line: &Vec3<T>, p: [T; 2]) -> T {
    (line.x() * p[0] + line.y() * p[1] + line.z()).abs()
        / (line.x() * line.x() + line.y() * line.y()).sqrt()
}

/// Distance from a point to a finite segment.
pub fn point_segment_distance<T: Scalar>(seg: &LineSegment<T>, p: [T; 2]) -> T {
    let vx = seg.p2[0] - seg.p1[0];
    let vy = seg.p2[1] - seg.p1[1];
    let wx = p[0] - seg.p1[0];
    let wy = p[1] - seg.p1[1];
    let len2 = vx * vx + vy * vy;
    let t = if len2 > T::zero() {
        ((wx * vx + wy * vy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let dx = wx - t * vx;
    let dy = wy - t * vy;
    (dx * dx + dy * dy).sqrt()
}

/// All line segments observed in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLines<T> {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub segments: Vec<LineSegment<T>>,
}

impl<T: Scalar> FrameLines<T> {
    pub fn new(
        frame_index: usize,
        width: usize,
        height: usize,
        segments: Vec<LineSegment<T>>,
    ) -> Result<Self> {
        let fl = FrameLines {
            frame_index,
            width,
            height,
            segments,
        };
        fl.validate()?;
        Ok(fl)
    }

    /// Checks image bounds (with a small tolerance for sub-pixel endpoints) and segment sanity.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::ZeroDimension);
        }
        let tol = T::lit(1e-6);
        let w = T::from_usize_lossy(self.width) + tol;
        let h = T::from_usize_lossy(self.height) + tol;
        for s in &self.segments {
            for p in [s.p1, s.p2] {
                if p[0] < -tol || p[1] < -tol || p[0] > w || p[1] > h {
                    return Err(Error::InvalidSegment(format!(
                        "endpoint {p:?} outside {}x{} frame",
                        self.width, self.height
                    )));
                }
            }
            if s.p1 == s.p2 || !s.length().is_finite() {
                return Err(Error::InvalidSegment(format!("degenerate segment {s:?}")));
            }
        }
        Ok(())
    }

    /// Drops segments shorter than `min_length`.
    pub fn filter_short(mut self, min_length: T) -> Self {
        self.segments.retain(|s| s.length() >= min_length);
        self
    }

    pub fn diagonal(&self) -> T {
        let w = T::from_usize_lossy(self.width);
        let h = T::from_usize_lossy(self.height);
        (w * w + h * h).sqrt()
    }
}
