//! Line segments, vanishing points and the per-frame geometric feature sequence.

pub mod camera;
pub mod features;
pub mod hough;
pub mod io;
pub mod lines;
pub mod vanishing;

pub use camera::{
    normalize_direction_gen, normalize_direction_real, reference_intrinsics, unproject,
    unproject_homogeneous, Intrinsics,
};
pub use features::{
    associate, build_sequence, Domain, FeatureSequence, FrameFeature, FrameRecord, Label,
    SequenceConfig, FEATURE_DIM,
};
pub use hough::{detect_line_segments, GrayImage, HoughConfig};
pub use lines::{point_line_distance, FrameLines, LineSegment, MIN_SEGMENT_LENGTH};
pub use vanishing::{
    estimate_vanishing_points, outside_distance, VanishingPointEstimate, VpConfig,
};
