//! End-to-end tracking: 2D tracking, per-window association, stitching and
//! target selection.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{cascade_window, Branch, Mode, Tracklet3D};
use crate::config::{ConfigError, RoutineConfig};
use crate::cross_view::cluster_segments;
use crate::cross_window::Stitcher;
use crate::geometry::{CameraId, Rig};
use crate::io::{TargetRecord, TrackRecord, ViewBox};
use crate::sv_track::{
    segment_in_window, track_camera, Bbox, Detection, Frame, TrackId, Tracklet2D, Window, WindowGrid,
};
use crate::target::{buffer_bbox, reproject_target_2d, TargetEvent, TargetMaintainer, TargetTrack};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("detection for camera {0} which is not in the rig")]
    UnknownCamera(CameraId),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

/// Per-window counters, useful for diagnosing routing decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub start: Frame,
    pub end: Frame,
    pub segments: usize,
    pub clusters: usize,
    pub triangulated: usize,
    pub plane: usize,
    pub dropped: usize,
    pub gated_out: usize,
    pub fragments: usize,
    pub matched: usize,
    pub born: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub tracks: BTreeMap<TrackId, Tracklet3D>,
    pub target: TargetTrack,
    pub target_records: Vec<TargetRecord>,
    pub events: Vec<TargetEvent>,
    pub windows: Vec<WindowSummary>,
    pub interpolated_frames: usize,
}

impl PipelineOutput {
    /// Every frame of every track, ordered by track then frame.
    pub fn track_records(&self) -> Vec<TrackRecord> {
        self.tracks
            .iter()
            .flat_map(|(id, t)| {
                t.points.iter().map(move |(f, p)| TrackRecord {
                    frame: *f,
                    track_id: *id,
                    x: p.position.into(),
                    provenance: p.provenance,
                    views: p.views.clone(),
                })
            })
            .collect()
    }
}

/// Runs the full pipeline on `threads` workers (0 picks the rayon default).
/// Output does not depend on the thread count.
pub fn run(
    rig: &Rig,
    detections: &[Detection],
    cfg: &RoutineConfig,
    mode: Mode,
    threads: usize,
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    pool.install(|| run_inner(rig, detections, cfg, mode))
}

fn run_inner(
    rig: &Rig,
    detections: &[Detection],
    cfg: &RoutineConfig,
    mode: Mode,
) -> Result<PipelineOutput, PipelineError> {
    let plane = cfg.plane()?;
    let space = cfg.space()?;
    let cascade_cfg = cfg.cascade();

    let mut per_camera: BTreeMap<CameraId, BTreeMap<Frame, Vec<Bbox>>> =
        rig.ids().map(|c| (c, BTreeMap::new())).collect();
    for d in detections {
        per_camera
            .get_mut(&d.camera)
            .ok_or(PipelineError::UnknownCamera(d.camera))?
            .entry(d.frame)
            .or_default()
            .push(d.bbox);
    }
    let (Some(first), Some(last)) = (
        detections.iter().map(|d| d.frame).min(),
        detections.iter().map(|d| d.frame).max(),
    ) else {
        return Ok(PipelineOutput {
            tracks: BTreeMap::new(),
            target: TargetTrack::default(),
            target_records: Vec::new(),
            events: Vec::new(),
            windows: Vec::new(),
            interpolated_frames: 0,
        });
    };

    let tracker = cfg.tracker();
    let tracklets: Vec<Tracklet2D> = per_camera
        .par_iter()
        .map(|(cam, dets)| track_camera(*cam, dets, first..=last, tracker))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    log::info!("{} single-view tracklets", tracklets.len());

    let grid = WindowGrid::new(first, last, cfg.omega);
    let seg_cfg = cfg.segments();
    let per_window: Vec<(Window, Vec<Tracklet3D>, WindowSummary)> = grid
        .windows()
        .into_par_iter()
        .map(|w| {
            let segments: Vec<_> = tracklets
                .iter()
                .filter(|t| {
                    t.first_frame().is_some_and(|a| a <= w.end()) && t.last_frame().is_some_and(|b| b >= w.start)
                })
                .filter_map(|t| segment_in_window(t, w, &seg_cfg))
                .collect();
            let clusters = cluster_segments(&segments, rig, cfg.lambda);
            let out = cascade_window(&segments, &clusters, rig, &plane, &space, &cascade_cfg, mode);
            let count = |b: Branch| out.routes.iter().filter(|r| **r == b).count();
            let summary = WindowSummary {
                start: w.start,
                end: w.end(),
                segments: segments.len(),
                clusters: clusters.len(),
                triangulated: count(Branch::Triangulation),
                plane: count(Branch::Plane),
                dropped: count(Branch::Dropped),
                gated_out: out.gated_out,
                fragments: out.tracklets.len(),
                matched: 0,
                born: 0,
            };
            (w, out.tracklets, summary)
        })
        .collect();

    let mut stitcher = Stitcher::new(cfg.unmatched_threshold);
    let mut maintainer = TargetMaintainer::new(cfg.criteria(), space);
    let mut events = Vec::new();
    let mut windows = Vec::new();
    for (w, fragments, mut summary) in per_window {
        let report = stitcher.push(w, fragments);
        summary.matched = report.matched;
        summary.born = report.born;
        let extended: BTreeSet<TrackId> = report.ids.iter().copied().collect();
        for e in maintainer.update(w.end(), stitcher.tracks(), &extended) {
            log::info!("{e:?}");
            events.push(e);
        }
        windows.push(summary);
    }
    let tracks = stitcher.into_tracks();

    let mut target = maintainer.finish(&tracks);
    let interpolated_frames = target.fill_gaps(cfg.max_gap);
    target.smooth(cfg.smooth_taps);
    let reprojected = reproject_target_2d(&target, rig);
    let target_records = target
        .points
        .iter()
        .map(|(f, p)| {
            let per_view = reprojected
                .iter()
                .filter_map(|(cam, boxes)| boxes.get(f).map(|b| (*cam, b.bbox)))
                .flat_map(|(cam, b)| {
                    [
                        ViewBox::new(cam, &b, false),
                        ViewBox::new(cam, &buffer_bbox(&b, cfg.alpha), true),
                    ]
                })
                .collect();
            TargetRecord {
                frame: *f,
                track_id: p.track_id,
                x: p.point.position.into(),
                provenance: p.point.provenance,
                per_view,
            }
        })
        .collect();

    Ok(PipelineOutput {
        tracks,
        target,
        target_records,
        events,
        windows,
        interpolated_frames,
    })
}
