//! Target metrics against simulator ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraId, Point3};
use crate::io::TargetRecord;
use crate::sim::TruthRecord;
use crate::sv_track::{Bbox, Frame, TrackId};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no frame has both an estimate and ground truth")]
    EmptyOverlap,
    #[error("ground truth has no target")]
    NoTarget,
}

/// Number of changes between consecutive assigned ids, in frame order.
pub fn id_switches(timeline: &[(Frame, TrackId)]) -> usize {
    let mut sorted = timeline.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).filter(|w| w[0].1 != w[1].1).count()
}

/// Mean distance over frames present in both maps.
pub fn aed(estimate: &BTreeMap<Frame, Point3>, truth: &BTreeMap<Frame, Point3>) -> Result<f64, EvalError> {
    let d: Vec<f64> = estimate
        .iter()
        .filter_map(|(f, x)| truth.get(f).map(|t| (x - t).norm()))
        .collect();
    if d.is_empty() {
        return Err(EvalError::EmptyOverlap);
    }
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// A buffered box fails when the ground-truth box is less than half its side
/// or sticks out of it.
pub fn box_fails(buffered: &Bbox, truth: &Bbox) -> bool {
    let side = buffered.w.max(buffered.h);
    truth.w.max(truth.h) < 0.5 * side || !buffered.contains(truth)
}

pub fn failure_rate(pairs: &[(Bbox, Bbox)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let failed = pairs.iter().filter(|(b, t)| box_fails(b, t)).count();
    Some(failed as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub start: Frame,
    pub end: Frame,
    pub truth_frames: usize,
    pub estimated_frames: usize,
    pub aed_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id_switches: usize,
    pub aed_m: f64,
    pub failure_rate: f64,
    /// Fraction of ground-truth target frames with an estimate.
    pub coverage: f64,
    pub outage_frames: usize,
    pub evaluated_frames: usize,
    pub evaluated_boxes: usize,
    pub per_window: Vec<BucketStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Inclusive frame range to score; the whole clip when absent.
    pub frames: Option<(Frame, Frame)>,
    /// Length of the per-window breakdown buckets.
    pub bucket: Frame,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            frames: None,
            bucket: 30,
        }
    }
}

/// Scores the target output. Only boxes of cameras that actually saw the
/// target count toward the failure rate.
pub fn evaluate(records: &[TargetRecord], truth: &[TruthRecord], opts: &EvalOptions) -> Result<Report, EvalError> {
    let in_range = |f: Frame| opts.frames.is_none_or(|(a, b)| f >= a && f <= b);
    let truth: BTreeMap<Frame, &TruthRecord> = truth
        .iter()
        .filter(|t| t.is_target && in_range(t.frame))
        .map(|t| (t.frame, t))
        .collect();
    if truth.is_empty() {
        return Err(EvalError::NoTarget);
    }
    let records: BTreeMap<Frame, &TargetRecord> = records
        .iter()
        .filter(|r| in_range(r.frame))
        .map(|r| (r.frame, r))
        .collect();
    let estimate: BTreeMap<Frame, Point3> = records.iter().map(|(f, r)| (*f, Point3::from(r.x))).collect();
    let gt: BTreeMap<Frame, Point3> = truth.iter().map(|(f, t)| (*f, t.center())).collect();
    let aed_m = aed(&estimate, &gt)?;

    let timeline: Vec<(Frame, TrackId)> = records.iter().map(|(f, r)| (*f, r.track_id)).collect();
    let mut pairs = Vec::new();
    for (f, r) in &records {
        let Some(t) = truth.get(f) else { continue };
        let gt_boxes: BTreeMap<CameraId, Bbox> = t
            .boxes
            .iter()
            .filter(|b| b.visible)
            .map(|b| (b.camera, b.bbox()))
            .collect();
        for v in r.per_view.iter().filter(|v| v.buffered) {
            if let Some(g) = gt_boxes.get(&v.camera) {
                pairs.push((v.bbox(), *g));
            }
        }
    }

    let covered = gt.keys().filter(|f| estimate.contains_key(f)).count();
    let first = *gt.keys().next().expect("non-empty");
    let last = *gt.keys().next_back().expect("non-empty");
    let bucket = opts.bucket.max(1);
    let per_window = (first..=last)
        .step_by(bucket as usize)
        .map(|start| {
            let end = (start + bucket - 1).min(last);
            let g: BTreeMap<Frame, Point3> = gt.range(start..=end).map(|(f, p)| (*f, *p)).collect();
            let e: BTreeMap<Frame, Point3> = estimate.range(start..=end).map(|(f, p)| (*f, *p)).collect();
            BucketStats {
                start,
                end,
                truth_frames: g.len(),
                estimated_frames: g.keys().filter(|f| e.contains_key(f)).count(),
                aed_m: aed(&e, &g).ok(),
            }
        })
        .collect();

    Ok(Report {
        id_switches: id_switches(&timeline),
        aed_m,
        failure_rate: failure_rate(&pairs).unwrap_or(0.0),
        coverage: covered as f64 / gt.len() as f64,
        outage_frames: gt.len() - covered,
        evaluated_frames: covered,
        evaluated_boxes: pairs.len(),
        per_window,
        config: None,
    })
}
