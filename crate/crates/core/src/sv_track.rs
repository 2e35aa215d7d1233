//! Per-camera IoU tracking and sliding-window segmentation of 2D tracklets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraId, Point2};

pub type Frame = i64;
pub type TrackId = u64;

/// Center-parameterized box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Bbox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
    pub fn top_center(&self) -> Point2 {
        Point2::new(self.x, self.y - self.h / 2.0)
    }
    pub fn bottom_center(&self) -> Point2 {
        Point2::new(self.x, self.y + self.h / 2.0)
    }
    /// `|w + h|`, the normalizer of the epipolar box distance.
    pub fn scale(&self) -> f64 {
        (self.w + self.h).abs()
    }
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
    pub fn left(&self) -> f64 {
        self.x - self.w / 2.0
    }
    pub fn right(&self) -> f64 {
        self.x + self.w / 2.0
    }
    pub fn top(&self) -> f64 {
        self.y - self.h / 2.0
    }
    pub fn bottom(&self) -> f64 {
        self.y + self.h / 2.0
    }

    /// `true` when `other` lies inside `self`, boundary included.
    pub fn contains(&self, other: &Bbox) -> bool {
        other.left() >= self.left()
            && other.right() <= self.right()
            && other.top() >= self.top()
            && other.bottom() <= self.bottom()
    }

    fn lerp(&self, other: &Bbox, s: f64) -> Bbox {
        Bbox {
            x: self.x + (other.x - self.x) * s,
            y: self.y + (other.y - self.y) * s,
            w: self.w + (other.w - self.w) * s,
            h: self.h + (other.h - self.h) * s,
        }
    }
}

pub fn iou(a: &Bbox, b: &Bbox) -> f64 {
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: Frame,
    pub camera: CameraId,
    pub bbox: Bbox,
    pub confidence: f64,
}

/// A frame-indexed sequence of boxes from one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet2D {
    pub camera: CameraId,
    pub track_id: TrackId,
    pub boxes: BTreeMap<Frame, Bbox>,
}

impl Tracklet2D {
    pub fn first_frame(&self) -> Option<Frame> {
        self.boxes.keys().next().copied()
    }
    pub fn last_frame(&self) -> Option<Frame> {
        self.boxes.keys().next_back().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouTrackerConfig {
    pub iou_threshold: f64,
    /// Tracks unmatched for more than this many frames are closed.
    pub max_age: Frame,
}

impl Default for IouTrackerConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.1,
            max_age: 2,
        }
    }
}

#[derive(Debug, Clone)]
struct LiveTrack {
    id: TrackId,
    boxes: BTreeMap<Frame, Bbox>,
    last_box: Bbox,
    last_frame: Frame,
}

/// Greedy IoU tracker state for one camera.
#[derive(Debug, Clone)]
pub struct IouTracker {
    camera: CameraId,
    config: IouTrackerConfig,
    next_id: TrackId,
    live: Vec<LiveTrack>,
}

impl IouTracker {
    pub fn new(camera: CameraId, config: IouTrackerConfig) -> Self {
        Self {
            camera,
            config,
            next_id: 0,
            live: Vec::new(),
        }
    }

    pub fn camera(&self) -> CameraId {
        self.camera
    }

    pub fn live_track_ids(&self) -> Vec<TrackId> {
        self.live.iter().map(|t| t.id).collect()
    }

    /// Advances the tracker to `frame`, consuming that frame's detections for
    /// this camera. Returns tracklets that aged out.
    pub fn step(&mut self, frame: Frame, detections: &[Bbox]) -> Vec<Tracklet2D> {
        let mut pairs = Vec::new();
        for (ti, track) in self.live.iter().enumerate() {
            for (di, det) in detections.iter().enumerate() {
                let v = iou(&track.last_box, det);
                if v >= self.config.iou_threshold {
                    pairs.push((v, track.id, ti, di));
                }
            }
        }
        // Descending IoU, ties to the lower track id, then lower detection index.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
        let mut track_used = vec![false; self.live.len()];
        let mut det_used = vec![false; detections.len()];
        for (_, _, ti, di) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            let track = &mut self.live[ti];
            track.boxes.insert(frame, detections[di]);
            track.last_box = detections[di];
            track.last_frame = frame;
        }

        let max_age = self.config.max_age;
        let (closed, live): (Vec<_>, Vec<_>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| frame - t.last_frame > max_age);
        self.live = live;

        for (di, det) in detections.iter().enumerate() {
            if det_used[di] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.live.push(LiveTrack {
                id,
                boxes: BTreeMap::from([(frame, *det)]),
                last_box: *det,
                last_frame: frame,
            });
        }
        closed.into_iter().map(|t| self.finish_track(t)).collect()
    }

    /// Closes every live track.
    pub fn flush(&mut self) -> Vec<Tracklet2D> {
        std::mem::take(&mut self.live)
            .into_iter()
            .map(|t| self.finish_track(t))
            .collect()
    }

    fn finish_track(&self, t: LiveTrack) -> Tracklet2D {
        Tracklet2D {
            camera: self.camera,
            track_id: t.id,
            boxes: t.boxes,
        }
    }
}

/// Runs a tracker over a frame range for one camera. `detections` maps frame
/// to that frame's boxes; frames absent from the map are empty.
pub fn track_camera(
    camera: CameraId,
    detections: &BTreeMap<Frame, Vec<Bbox>>,
    frames: std::ops::RangeInclusive<Frame>,
    config: IouTrackerConfig,
) -> Vec<Tracklet2D> {
    let mut tracker = IouTracker::new(camera, config);
    let mut out = Vec::new();
    for frame in frames {
        let dets = detections.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        out.extend(tracker.step(frame, dets));
    }
    out.extend(tracker.flush());
    out.sort_by_key(|t| t.track_id);
    out
}

/// A temporal window `[start, start + len]`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window {
    pub start: Frame,
    pub len: Frame,
}

impl Window {
    pub fn end(&self) -> Frame {
        self.start + self.len
    }
    pub fn contains(&self, frame: Frame) -> bool {
        frame >= self.start && frame <= self.end()
    }
    pub fn frames(&self) -> std::ops::RangeInclusive<Frame> {
        self.start..=self.end()
    }
}

/// Windows of length `omega` stepping by `omega / 2` over a clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGrid {
    pub origin: Frame,
    pub last: Frame,
    pub omega: Frame,
}

impl WindowGrid {
    /// Panics if `omega` is odd or below 2.
    pub fn new(origin: Frame, last: Frame, omega: Frame) -> Self {
        assert!(omega >= 2 && omega % 2 == 0, "window length must be even and >= 2");
        Self { origin, last, omega }
    }

    pub fn step(&self) -> Frame {
        self.omega / 2
    }

    /// Grid windows ending at or before `last`, plus one trailing window when
    /// the tail of the clip would otherwise be uncovered.
    pub fn windows(&self) -> Vec<Window> {
        let mut out = Vec::new();
        let mut start = self.origin;
        loop {
            let w = Window { start, len: self.omega };
            if w.end() <= self.last {
                out.push(w);
                start += self.step();
                continue;
            }
            let covered = out.last().map(|w: &Window| w.end()).unwrap_or(self.origin - 1);
            if covered < self.last {
                out.push(w);
            }
            break;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    /// Segments with fewer observed boxes are discarded.
    pub min_observed: usize,
    /// Frames extrapolated past either end of the observed span.
    pub max_extrapolation: Frame,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_observed: 5,
            max_extrapolation: 2,
        }
    }
}

/// One camera's tracklet restricted to a window, with missing frames filled.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSegment2D {
    pub window: Window,
    pub camera: CameraId,
    pub track_id: TrackId,
    /// Filled boxes; the key set is the valid-frame set.
    pub boxes: BTreeMap<Frame, Bbox>,
    /// Frames that carried a real detection.
    pub observed: BTreeSet<Frame>,
}

impl WindowSegment2D {
    pub fn valid_frames(&self) -> impl Iterator<Item = Frame> + '_ {
        self.boxes.keys().copied()
    }

    pub fn is_observed(&self, frame: Frame) -> bool {
        self.observed.contains(&frame)
    }

    /// Observed boxes only.
    pub fn observed_boxes(&self) -> impl Iterator<Item = (Frame, &Bbox)> + '_ {
        self.boxes
            .iter()
            .filter(|(f, _)| self.observed.contains(f))
            .map(|(f, b)| (*f, b))
    }
}

/// Cuts `tracklet` into the windows of `grid`, filling gaps in each.
pub fn segment_windows(tracklet: &Tracklet2D, grid: &WindowGrid, config: &SegmentConfig) -> Vec<WindowSegment2D> {
    grid.windows()
        .into_iter()
        .filter_map(|w| segment_in_window(tracklet, w, config))
        .collect()
}

/// Convenience grid spanning the tracklet itself.
pub fn segment_windows_own_span(tracklet: &Tracklet2D, omega: Frame, config: &SegmentConfig) -> Vec<WindowSegment2D> {
    match (tracklet.first_frame(), tracklet.last_frame()) {
        (Some(a), Some(b)) => segment_windows(tracklet, &WindowGrid::new(a, b, omega), config),
        _ => Vec::new(),
    }
}

pub fn segment_in_window(tracklet: &Tracklet2D, window: Window, config: &SegmentConfig) -> Option<WindowSegment2D> {
    let observed: BTreeMap<Frame, Bbox> = tracklet.boxes.range(window.frames()).map(|(f, b)| (*f, *b)).collect();
    if observed.len() < config.min_observed.max(1) {
        return None;
    }
    let boxes = fill_gaps(&observed, window, config.max_extrapolation);
    Some(WindowSegment2D {
        window,
        camera: tracklet.camera,
        track_id: tracklet.track_id,
        observed: observed.keys().copied().collect(),
        boxes,
    })
}

/// Linear interpolation of interior gaps and constant-velocity extrapolation
/// of at most `max_extrapolation` frames past the observed span.
fn fill_gaps(observed: &BTreeMap<Frame, Bbox>, window: Window, max_extrapolation: Frame) -> BTreeMap<Frame, Bbox> {
    let mut out = observed.clone();
    let known: Vec<(Frame, Bbox)> = observed.iter().map(|(f, b)| (*f, *b)).collect();
    for pair in known.windows(2) {
        let ((fa, a), (fb, b)) = (pair[0], pair[1]);
        for f in fa + 1..fb {
            out.insert(f, a.lerp(&b, (f - fa) as f64 / (fb - fa) as f64));
        }
    }
    if known.len() >= 2 {
        let (f0, b0) = known[0];
        let (f1, b1) = known[1];
        for k in 1..=max_extrapolation {
            let f = f0 - k;
            if f < window.start {
                break;
            }
            out.insert(f, extrapolate(&b0, &b1, f1 - f0, k));
        }
        let (fl, bl) = known[known.len() - 1];
        let (fp, bp) = known[known.len() - 2];
        for k in 1..=max_extrapolation {
            let f = fl + k;
            if f > window.end() {
                break;
            }
            out.insert(f, extrapolate(&bl, &bp, fl - fp, k));
        }
    }
    out
}

/// Steps `k` frames beyond `edge`, away from `inner` which is `gap` frames in.
fn extrapolate(edge: &Bbox, inner: &Bbox, gap: Frame, k: Frame) -> Bbox {
    let s = -(k as f64) / gap as f64;
    let mut b = edge.lerp(inner, s);
    if b.w <= 0.0 || b.h <= 0.0 {
        b.w = edge.w;
        b.h = edge.h;
    }
    b
}
