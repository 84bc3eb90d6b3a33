//! Synthetic Manhattan-world sequences with known geometry.

pub mod dataset;
pub mod raster;
pub mod render;
pub mod trajectory;

pub use dataset::{
    generate_sample, load_ground_truth, load_sample, make_dataset, DatasetConfig, SplitFractions,
    SyntheticSample,
};
pub use raster::{rasterize_segments, render_wireframe_cube};
pub use render::{render_line_segments, RenderedFrame, Scene, SceneSpec};
pub use trajectory::{
    apply_jitter, generate_trajectory, CameraTrajectory, JitterSpec, TrajectoryConfig,
};
