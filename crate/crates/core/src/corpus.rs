//! Turning sample directories into feature sequences.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::camera::{reference_intrinsics, Intrinsics};
use crate::geometry::features::{build_sequence, FeatureSequence, Label, SequenceConfig};
use crate::geometry::hough::{detect_line_segments, GrayImage, HoughConfig};
use crate::geometry::io::{read_features, IntrinsicsSidecar};
use crate::geometry::lines::FrameLines;
use crate::manifest::{Manifest, ManifestEntry, Split};
use crate::synthworld::dataset::{load_sample, INTRINSICS_FILE, SEGMENTS_FILE};

/// Cached feature file inside a sample directory.
pub const FEATURES_FILE: &str = "features.json";

/// Builds a sequence from per-frame lines and their intrinsics sidecar.
///
/// The reference camera is the componentwise median of the sidecar. For
/// generated videos the sidecar is expected to hold the paired real reference,
/// already rescaled to the generated resolution.
pub fn sequence_from_lines(
    id: &str,
    frames: Vec<FrameLines<f64>>,
    sidecar: &IntrinsicsSidecar,
    domain: Label,
    cfg: &SequenceConfig,
) -> Result<FeatureSequence> {
    let per_frame = sidecar.for_frames(frames.len())?;
    let k_ref: Intrinsics<f64> = reference_intrinsics(&per_frame)?;
    let pairs: Vec<_> = frames.into_iter().zip(per_frame).collect();
    build_sequence(id, &pairs, domain, &k_ref, cfg)
}

/// Runs the line detector on every image, in the given order.
pub fn lines_from_images(paths: &[PathBuf], cfg: &HoughConfig) -> Result<Vec<FrameLines<f64>>> {
    paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| detect_line_segments(&GrayImage::open(p)?, i, cfg))
        .collect()
}

/// Image files (`.png`, `.pgm`) of a directory, sorted by name.
pub fn frame_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Features of one manifest entry: the cached feature file when present,
/// otherwise extracted from its segments and intrinsics.
pub fn load_entry(
    manifest: &Manifest,
    entry: &ManifestEntry,
    cfg: &SequenceConfig,
) -> Result<FeatureSequence> {
    let dir = manifest.dir_of(entry);
    let cached = dir.join(FEATURES_FILE);
    if cached.is_file() {
        let seq = read_features(&cached)?;
        if seq.label != entry.label {
            return Err(Error::LabelError(format!(
                "`{}` is {} in the manifest but {} in {}",
                entry.id,
                entry.label.as_str(),
                seq.label.as_str(),
                cached.display()
            )));
        }
        return Ok(seq);
    }
    if !dir.join(SEGMENTS_FILE).is_file() || !dir.join(INTRINSICS_FILE).is_file() {
        return Err(Error::InvalidArgument(format!(
            "{} has neither {FEATURES_FILE} nor {SEGMENTS_FILE} + {INTRINSICS_FILE}",
            dir.display()
        )));
    }
    let (frames, sidecar) = load_sample(&dir)?;
    sequence_from_lines(&entry.id, frames, &sidecar, entry.label, cfg)
}

/// Features of every sample in `split`, in manifest order.
pub fn load_split(
    manifest: &Manifest,
    split: Split,
    cfg: &SequenceConfig,
) -> Result<Vec<FeatureSequence>> {
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    entries
        .par_iter()
        .map(|e| load_entry(manifest, e, cfg))
        .collect()
}
