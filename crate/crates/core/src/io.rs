//! File formats: calibration JSON and JSON-lines records.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::Provenance;
use crate::geometry::{CameraId, CameraModel, Rig};
use crate::sv_track::{Bbox, Detection, Frame, TrackId};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibEntry {
    pub id: CameraId,
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl CalibEntry {
    pub fn from_camera(c: &CameraModel) -> Self {
        let row_major = |m: &nalgebra::Matrix3<f64>| {
            let mut out = [0.0; 9];
            for (i, v) in out.iter_mut().enumerate() {
                *v = m[(i / 3, i % 3)];
            }
            out
        };
        let t = c.translation();
        Self {
            id: c.id(),
            k: row_major(c.intrinsics()),
            r: row_major(c.rotation()),
            t: [t.x, t.y, t.z],
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel, IoError> {
        let k = nalgebra::Matrix3::from_row_slice(&self.k);
        let r = nalgebra::Matrix3::from_row_slice(&self.r);
        let t = nalgebra::Vector3::from_row_slice(&self.t);
        CameraModel::new(self.id, k, r, t).map_err(|e| IoError::Invalid(e.to_string()))
    }
}

pub fn calibration_to_json(rig: &Rig) -> String {
    let entries: Vec<_> = rig.cameras().map(CalibEntry::from_camera).collect();
    serde_json::to_string_pretty(&entries).expect("calibration serializes")
}

pub fn calibration_from_json(text: &str) -> Result<Rig, IoError> {
    let entries: Vec<CalibEntry> = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let cams = entries
        .iter()
        .map(CalibEntry::to_camera)
        .collect::<Result<Vec<_>, _>>()?;
    Rig::new(cams).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IoError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: Frame,
    pub camera: CameraId,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            frame: d.frame,
            camera: d.camera,
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            confidence: d.confidence,
        }
    }
}

/// Parses and validates a detection stream against `rig`.
pub fn detections_from_jsonl(text: &str, rig: &Rig) -> Result<Vec<Detection>, IoError> {
    let records: Vec<DetectionRecord> = read_jsonl(text)?;
    let mut prev_frame = Frame::MIN;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let bad = |msg: &str| IoError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            if r.frame < 0 {
                return Err(bad("negative frame"));
            }
            if r.frame < prev_frame {
                return Err(bad("detections must be sorted by frame"));
            }
            prev_frame = r.frame;
            if rig.camera(r.camera).is_none() {
                return Err(bad(&format!("camera {} is not in the calibration", r.camera)));
            }
            let bbox = Bbox::new(r.x, r.y, r.w, r.h);
            if !bbox.is_valid() {
                return Err(bad("box needs finite coordinates and positive size"));
            }
            if !(0.0..=1.0).contains(&r.confidence) {
                return Err(bad("confidence must lie in [0, 1]"));
            }
            Ok(Detection {
                frame: r.frame,
                camera: r.camera,
                bbox,
                confidence: r.confidence,
            })
        })
        .collect()
}

pub fn detections_to_jsonl(dets: &[Detection]) -> String {
    let records: Vec<DetectionRecord> = dets.iter().map(DetectionRecord::from).collect();
    write_jsonl(&records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewBox {
    pub camera: CameraId,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub buffered: bool,
}

impl ViewBox {
    pub fn new(camera: CameraId, b: &Bbox, buffered: bool) -> Self {
        Self {
            camera,
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            buffered,
        }
    }

    pub fn bbox(&self) -> Bbox {
        Bbox::new(self.x, self.y, self.w, self.h)
    }
}

/// One frame of the target output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub frame: Frame,
    pub track_id: TrackId,
    #[serde(rename = "X")]
    pub x: [f64; 3],
    pub provenance: Provenance,
    pub per_view: Vec<ViewBox>,
}

/// One frame of any tracked identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: Frame,
    pub track_id: TrackId,
    #[serde(rename = "X")]
    pub x: [f64; 3],
    pub provenance: Provenance,
    pub views: Vec<CameraId>,
}
