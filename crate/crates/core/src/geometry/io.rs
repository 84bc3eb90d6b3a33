//! Segment, intrinsics and feature file formats.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::camera::Intrinsics;
use crate::geometry::features::FeatureSequence;
use crate::geometry::lines::{FrameLines, LineSegment};

/// One line of a segments file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentsRecord {
    pub frame: usize,
    pub width: usize,
    pub height: usize,
    pub segments: Vec<[f64; 4]>,
}

impl From<&FrameLines<f64>> for SegmentsRecord {
    fn from(fl: &FrameLines<f64>) -> Self {
        SegmentsRecord {
            frame: fl.frame_index,
            width: fl.width,
            height: fl.height,
            segments: fl
                .segments
                .iter()
                .map(|s| [s.p1[0], s.p1[1], s.p2[0], s.p2[1]])
                .collect(),
        }
    }
}

impl SegmentsRecord {
    pub fn into_frame_lines(self) -> Result<FrameLines<f64>> {
        let segs = self
            .segments
            .iter()
            .map(|s| LineSegment::new([s[0], s[1]], [s[2], s[3]]))
            .collect();
        FrameLines::new(self.frame, self.width, self.height, segs)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a JSON Lines segments file, one frame per non-empty line.
pub fn read_segments(path: &Path) -> Result<Vec<FrameLines<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SegmentsRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", no + 1),
        })?;
        frames.push(rec.into_frame_lines().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", no + 1),
        })?);
    }
    Ok(frames)
}

pub fn write_segments(path: &Path, frames: &[FrameLines<f64>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for fl in frames {
        serde_json::to_writer(&mut w, &SegmentsRecord::from(fl))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Intrinsics sidecar: per-frame list or one set shared by all frames, with
/// the optional resolution the values refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsSidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub frames: Vec<Intrinsics<f64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SidecarRepr {
    PerFrame(IntrinsicsSidecar),
    Single {
        width: Option<usize>,
        height: Option<usize>,
        #[serde(flatten)]
        k: Intrinsics<f64>,
    },
}

impl IntrinsicsSidecar {
    pub fn read(path: &Path) -> Result<Self> {
        let repr: SidecarRepr = read_json(path)?;
        let sidecar = match repr {
            SidecarRepr::PerFrame(s) => s,
            SidecarRepr::Single { width, height, k } => IntrinsicsSidecar {
                width,
                height,
                frames: vec![k],
            },
        };
        if sidecar.frames.is_empty() {
            return Err(Error::EmptyList);
        }
        for k in &sidecar.frames {
            k.validate()?;
        }
        Ok(sidecar)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Intrinsics for `n` frames; a single entry is shared.
    pub fn for_frames(&self, n: usize) -> Result<Vec<Intrinsics<f64>>> {
        match self.frames.len() {
            1 => Ok(vec![self.frames[0]; n]),
            m if m == n => Ok(self.frames.clone()),
            m => Err(Error::InvalidArgument(format!(
                "intrinsics list has {m} entries for {n} frames"
            ))),
        }
    }
}

pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    read_json(path)
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    let text = serde_json::to_string(seq)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_accepts_single_object() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        fs::write(&p, r#"{"fx": 500, "fy": 510, "cx": 320, "cy": 240}"#).unwrap();
        let s = IntrinsicsSidecar::read(&p).unwrap();
        assert_eq!(s.width, None);
        let ks = s.for_frames(3).unwrap();
        assert_eq!(ks.len(), 3);
        assert_eq!(ks[2].fy, 510.0);
    }

    #[test]
    fn sidecar_per_frame_with_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        fs::write(
            &p,
            r#"{"width": 640, "height": 480, "frames": [{"fx": 500, "fy": 500, "cx": 320, "cy": 240},
                {"fx": 501, "fy": 501, "cx": 320, "cy": 240}]}"#,
        )
        .unwrap();
        let s = IntrinsicsSidecar::read(&p).unwrap();
        assert_eq!((s.width, s.height), (Some(640), Some(480)));
        assert!(s.for_frames(2).is_ok());
        assert!(s.for_frames(3).is_err());
    }

    #[test]
    fn segments_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        let fl = FrameLines::new(
            3,
            100,
            80,
            vec![LineSegment::new([1.5, 2.0], [50.25, 60.0])],
        )
        .unwrap();
        write_segments(&p, &[fl.clone()]).unwrap();
        assert_eq!(read_segments(&p).unwrap(), vec![fl]);
    }
}
