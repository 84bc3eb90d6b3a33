//! Vanishing-point geometry features and a geometry-aware transformer for
//! telling smooth camera footage apart from temporally unstable generated video.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod linalg;
pub mod manifest;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod synthworld;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the generic geometry types.
pub type Intrinsics = geometry::camera::Intrinsics<f64>;
pub type LineSegment = geometry::lines::LineSegment<f64>;
pub type FrameLines = geometry::lines::FrameLines<f64>;
pub type VanishingPointEstimate = geometry::vanishing::VanishingPointEstimate<f64>;
pub type Vec3 = linalg::Vec3<f64>;
pub type Mat3 = linalg::Mat3<f64>;
