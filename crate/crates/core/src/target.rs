//! Target selection on top of the multi-object output.
//!
//! Every identity is tracked; the target is whichever track reaches the
//! trigger heights inside the performance space for most of a recent span.
//! When that track ends, the next track to satisfy the rule takes over.

use std::collections::{BTreeMap, BTreeSet};

use crate::cascade::{Provenance, TrackPoint, TrackingSpace, Tracklet3D};
use crate::geometry::{triangulate, CameraId, Point3, Rig};
use crate::sv_track::{Bbox, Frame, TrackId, WindowSegment2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetCriteria {
    pub h_top: f64,
    pub h_bot: f64,
    /// Look-back span in frames.
    pub delta: Frame,
    /// Fraction of `delta` that must be exceeded.
    pub occupancy: f64,
}

impl Default for TargetCriteria {
    fn default() -> Self {
        Self {
            h_top: 1.5,
            h_bot: 0.5,
            delta: 30,
            occupancy: 0.5,
        }
    }
}

impl TargetCriteria {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.h_bot >= 0.0 && self.h_top >= self.h_bot) {
            return Err("trigger heights need h_top >= h_bot >= 0".into());
        }
        if self.delta < 1 {
            return Err("delta must be at least one frame".into());
        }
        if !(self.occupancy > 0.0 && self.occupancy < 1.0) {
            return Err("occupancy must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Triangulated top-center and bottom-center of the members' boxes at every
/// frame seen by at least two cameras, one of them observed.
pub fn top_bottom_3d(members: &[&WindowSegment2D], rig: &Rig) -> BTreeMap<Frame, (Point3, Point3)> {
    let frames: BTreeSet<Frame> = members.iter().flat_map(|m| m.valid_frames()).collect();
    let mut out = BTreeMap::new();
    for frame in frames {
        let present: Vec<_> = members
            .iter()
            .filter_map(|m| Some((rig.camera(m.camera)?, m.boxes.get(&frame)?, m.is_observed(frame))))
            .collect();
        if present.len() < 2 || !present.iter().any(|p| p.2) {
            continue;
        }
        let tops: Vec<_> = present.iter().map(|(c, b, _)| (*c, b.top_center())).collect();
        let bottoms: Vec<_> = present.iter().map(|(c, b, _)| (*c, b.bottom_center())).collect();
        match (triangulate(&tops), triangulate(&bottoms)) {
            (Ok(top), Ok(bottom)) => {
                out.insert(frame, (top, bottom));
            }
            (Err(e), _) | (_, Err(e)) => log::debug!("frame {frame}: no top/bottom: {e}"),
        }
    }
    out
}

/// Whether `frame` satisfies all three trigger conditions.
pub fn frame_triggers(t: &Tracklet3D, frame: Frame, space: &TrackingSpace, crit: &TargetCriteria) -> bool {
    let (Some(p), Some(top), Some(bottom)) = (t.points.get(&frame), t.top.get(&frame), t.bottom.get(&frame)) else {
        return false;
    };
    space.in_perf(&p.position) && top.z > crit.h_top && bottom.z > crit.h_bot
}

/// Number of triggering frames in `(now - delta, now]`.
pub fn trigger_count(t: &Tracklet3D, now: Frame, space: &TrackingSpace, crit: &TargetCriteria) -> usize {
    t.points
        .range(now - crit.delta + 1..=now)
        .filter(|(f, _)| frame_triggers(t, **f, space, crit))
        .count()
}

pub fn identify_target(t: &Tracklet3D, now: Frame, space: &TrackingSpace, crit: &TargetCriteria) -> bool {
    trigger_count(t, now, space, crit) as f64 > crit.occupancy * crit.delta as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEvent {
    Identified { track_id: TrackId, at: Frame },
    Lost { track_id: TrackId, at: Frame },
}

/// Stretch of the timeline during which one track is the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetSegment {
    pub track_id: TrackId,
    pub start: Frame,
    /// Last frame, once the track has been lost.
    pub end: Option<Frame>,
}

/// Sequential identification state, advanced once per window.
#[derive(Debug, Clone)]
pub struct TargetMaintainer {
    crit: TargetCriteria,
    space: TrackingSpace,
    current: Option<TrackId>,
    segments: Vec<TargetSegment>,
}

impl TargetMaintainer {
    pub fn new(crit: TargetCriteria, space: TrackingSpace) -> Self {
        Self {
            crit,
            space,
            current: None,
            segments: Vec::new(),
        }
    }

    pub fn current(&self) -> Option<TrackId> {
        self.current
    }

    pub fn segments(&self) -> &[TargetSegment] {
        &self.segments
    }

    /// `extended` holds the tracks that received data in the window ending
    /// at `now`.
    pub fn update(
        &mut self,
        now: Frame,
        tracks: &BTreeMap<TrackId, Tracklet3D>,
        extended: &BTreeSet<TrackId>,
    ) -> Vec<TargetEvent> {
        let mut events = Vec::new();
        if let Some(id) = self.current {
            if !extended.contains(&id) {
                let at = tracks.get(&id).and_then(Tracklet3D::last_frame).unwrap_or(now);
                if let Some(seg) = self.segments.last_mut() {
                    seg.end = Some(at);
                }
                self.current = None;
                events.push(TargetEvent::Lost { track_id: id, at });
            }
        }
        if self.current.is_none() {
            let best = extended
                .iter()
                .filter_map(|id| {
                    let t = tracks.get(id)?;
                    identify_target(t, now, &self.space, &self.crit)
                        .then(|| (trigger_count(t, now, &self.space, &self.crit), *id))
                })
                // Highest count, then lowest id.
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            if let Some((_, id)) = best {
                let floor = self.segments.last().and_then(|s| s.end).map(|e| e + 1);
                let first = tracks[&id].first_frame().unwrap_or(now);
                let start = floor.map_or(first, |f| first.max(f));
                self.segments.push(TargetSegment {
                    track_id: id,
                    start,
                    end: None,
                });
                self.current = Some(id);
                events.push(TargetEvent::Identified { track_id: id, at: now });
            }
        }
        events
    }

    /// Assembles the target trajectory from the final track registry.
    pub fn finish(&self, tracks: &BTreeMap<TrackId, Tracklet3D>) -> TargetTrack {
        let mut out = TargetTrack::default();
        for seg in &self.segments {
            let Some(t) = tracks.get(&seg.track_id) else { continue };
            let end = seg.end.or(t.last_frame()).unwrap_or(seg.start);
            for (f, p) in t.points.range(seg.start..=end) {
                out.points.insert(
                    *f,
                    TargetPoint {
                        track_id: seg.track_id,
                        point: p.clone(),
                    },
                );
            }
            for (cam, boxes) in &t.boxes {
                out.boxes
                    .entry(*cam)
                    .or_default()
                    .extend(boxes.range(seg.start..=end).map(|(f, b)| (*f, *b)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPoint {
    pub track_id: TrackId,
    pub point: TrackPoint,
}

/// The target's 3D trajectory and the observed boxes linked to it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetTrack {
    pub points: BTreeMap<Frame, TargetPoint>,
    pub boxes: BTreeMap<CameraId, BTreeMap<Frame, Bbox>>,
}

impl TargetTrack {
    /// Linearly bridges gaps of at most `max_gap` missing frames. Bridged
    /// frames take the id of the frame after the gap. Returns the number of
    /// frames added.
    pub fn fill_gaps(&mut self, max_gap: Frame) -> usize {
        let known: Vec<(Frame, Point3, TrackId)> = self
            .points
            .iter()
            .map(|(f, p)| (*f, p.point.position, p.track_id))
            .collect();
        let mut added = 0;
        for w in known.windows(2) {
            let ((f0, p0, _), (f1, p1, id1)) = (w[0], w[1]);
            let missing = f1 - f0 - 1;
            if missing < 1 || missing > max_gap {
                continue;
            }
            for f in f0 + 1..f1 {
                let s = (f - f0) as f64 / (f1 - f0) as f64;
                self.points.insert(
                    f,
                    TargetPoint {
                        track_id: id1,
                        point: TrackPoint {
                            position: p0 + (p1 - p0) * s,
                            provenance: Provenance::Interpolated,
                            views: Vec::new(),
                        },
                    },
                );
                added += 1;
            }
        }
        added
    }

    pub fn smooth(&mut self, taps: usize) {
        let smoothed = smooth_positions(&self.positions(), taps);
        for (f, x) in smoothed {
            if let Some(p) = self.points.get_mut(&f) {
                p.point.position = x;
            }
        }
    }

    pub fn positions(&self) -> BTreeMap<Frame, Point3> {
        self.points.iter().map(|(f, p)| (*f, p.point.position)).collect()
    }

    pub fn interpolated_frames(&self) -> Vec<Frame> {
        self.points
            .iter()
            .filter(|(_, p)| p.point.provenance == Provenance::Interpolated)
            .map(|(f, _)| *f)
            .collect()
    }
}

/// Centered moving average applied to each run of consecutive frames. Near
/// the ends of a run the window shrinks symmetrically.
pub fn smooth_positions(points: &BTreeMap<Frame, Point3>, taps: usize) -> BTreeMap<Frame, Point3> {
    let half = (taps / 2) as i64;
    let mut out = BTreeMap::new();
    let frames: Vec<(Frame, Point3)> = points.iter().map(|(f, p)| (*f, *p)).collect();
    let mut run_start = 0;
    for i in 0..=frames.len() {
        let breaks = i == frames.len() || (i > run_start && frames[i].0 != frames[i - 1].0 + 1);
        if !breaks {
            continue;
        }
        let run = &frames[run_start..i];
        let n = run.len() as i64;
        for (k, (f, _)) in run.iter().enumerate() {
            let k = k as i64;
            let h = half.min(k).min(n - 1 - k);
            let slice = &run[(k - h) as usize..=(k + h) as usize];
            let sum = slice
                .iter()
                .fold(nalgebra::Vector3::zeros(), |acc, (_, p)| acc + p.coords);
            out.insert(*f, Point3::from(sum / slice.len() as f64));
        }
        run_start = i;
    }
    out
}

pub fn smooth_track(t: &Tracklet3D, taps: usize) -> Tracklet3D {
    let positions = t.points.iter().map(|(f, p)| (*f, p.position)).collect();
    let mut out = t.clone();
    for (f, x) in smooth_positions(&positions, taps) {
        out.points.get_mut(&f).expect("same frames").position = x;
    }
    out
}

/// Square box with the same center and side `alpha * max(w, h)`.
pub fn buffer_bbox(b: &Bbox, alpha: f64) -> Bbox {
    let side = alpha * b.w.max(b.h);
    Bbox::new(b.x, b.y, side, side)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedBox {
    pub bbox: Bbox,
    /// `false` when the size was borrowed from an earlier box.
    pub attached: bool,
}

/// Projects the target into every camera. The box at each frame takes the
/// size of the linked box when that box lies within half its longer side of
/// the projection, and otherwise the size of the camera's last known box.
pub fn reproject_target_2d(track: &TargetTrack, rig: &Rig) -> BTreeMap<CameraId, BTreeMap<Frame, RefinedBox>> {
    let mut out = BTreeMap::new();
    for cam in rig.cameras() {
        let linked = track.boxes.get(&cam.id());
        let mut last_size: Option<(f64, f64)> = None;
        let mut per_cam = BTreeMap::new();
        for (f, p) in &track.points {
            let Ok(c) = cam.project(&p.point.position) else {
                continue;
            };
            let near = linked
                .and_then(|m| m.get(f))
                .filter(|b| (b.center() - c).norm() <= 0.5 * b.w.max(b.h));
            let refined = match near {
                Some(b) => {
                    last_size = Some((b.w, b.h));
                    RefinedBox {
                        bbox: Bbox::new(c.x, c.y, b.w, b.h),
                        attached: true,
                    }
                }
                None => {
                    let size = last_size.or_else(|| {
                        let m = linked?;
                        m.range(f..)
                            .next()
                            .or_else(|| m.range(..f).next_back())
                            .map(|(_, b)| (b.w, b.h))
                    });
                    let Some((w, h)) = size else { continue };
                    RefinedBox {
                        bbox: Bbox::new(c.x, c.y, w, h),
                        attached: false,
                    }
                }
            };
            per_cam.insert(*f, refined);
        }
        if !per_cam.is_empty() {
            out.insert(cam.id(), per_cam);
        }
    }
    out
}
