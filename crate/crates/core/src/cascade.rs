//! Cascaded 3D candidate generation.
//!
//! Clusters with enough well-spread views are triangulated. Single views and
//! opposite-view pairs are instead back-projected onto the known vertical
//! plane; the resulting per-view candidates are matched across cameras and
//! averaged, and candidates that find no partner are dropped.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cross_view::{complete_linkage, Cluster, CrossViewDistance, DistanceMatrix};
use crate::geometry::{ray_angle, ray_plane_intersect, triangulate, CameraId, PlaneSpec, Point3, Rig};
use crate::sv_track::{Bbox, Frame, TrackId, WindowSegment2D};
use crate::target::top_bottom_3d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Triangulated,
    PlaneIntersected,
    Interpolated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub position: Point3,
    pub provenance: Provenance,
    /// Cameras that contributed to this point.
    pub views: Vec<CameraId>,
}

/// A frame-indexed 3D trajectory together with its 2D evidence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tracklet3D {
    pub track_id: TrackId,
    pub points: BTreeMap<Frame, TrackPoint>,
    pub top: BTreeMap<Frame, Point3>,
    pub bottom: BTreeMap<Frame, Point3>,
    /// Observed boxes of the linked 2D tracklets, per camera.
    pub boxes: BTreeMap<CameraId, BTreeMap<Frame, Bbox>>,
    /// Linked 2D tracklets as `(camera, 2D track id)`.
    pub links: BTreeSet<(CameraId, TrackId)>,
}

impl Tracklet3D {
    pub fn position(&self, frame: Frame) -> Option<Point3> {
        self.points.get(&frame).map(|p| p.position)
    }
    pub fn first_frame(&self) -> Option<Frame> {
        self.points.keys().next().copied()
    }
    pub fn last_frame(&self) -> Option<Frame> {
        self.points.keys().next_back().copied()
    }
    pub fn cameras(&self) -> BTreeSet<CameraId> {
        self.links.iter().map(|(c, _)| *c).collect()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn absorb_links(&mut self, seg: &WindowSegment2D) {
        self.links.insert((seg.camera, seg.track_id));
        let per_cam = self.boxes.entry(seg.camera).or_default();
        per_cam.extend(seg.observed_boxes().map(|(f, b)| (f, *b)));
    }
}

/// Axis-aligned performance cuboid and its laterally buffered tracking space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSpace {
    /// `[x_min, y_min, z_min, x_max, y_max, z_max]` in meters.
    pub perf: [f64; 6],
    pub beta: f64,
}

impl TrackingSpace {
    pub fn new(perf: [f64; 6], beta: f64) -> Result<Self, String> {
        if !(0..3).all(|a| perf[a] < perf[a + 3]) {
            return Err("performance space needs min < max on every axis".into());
        }
        if beta.is_nan() || beta < 0.0 {
            return Err("spatial buffer must be non-negative".into());
        }
        Ok(Self { perf, beta })
    }

    pub fn track(&self) -> [f64; 6] {
        let [x0, y0, z0, x1, y1, z1] = self.perf;
        [x0 - self.beta, y0 - self.beta, z0, x1 + self.beta, y1 + self.beta, z1]
    }

    pub fn in_perf(&self, p: &Point3) -> bool {
        inside(&self.perf, p)
    }

    pub fn in_track(&self, p: &Point3) -> bool {
        inside(&self.track(), p)
    }
}

fn inside(b: &[f64; 6], p: &Point3) -> bool {
    (0..3).all(|a| p[a] >= b[a] && p[a] <= b[a + 3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cascade,
    TriangulationOnly,
    PlaneOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    /// Median ray angle above which a two-view cluster counts as opposite.
    pub theta_opp_deg: f64,
    /// Explicit opposite pairs; replaces the angle test when set.
    pub opposite_pairs: Option<Vec<(CameraId, CameraId)>>,
    /// Coplanar candidate matching cutoff (m).
    pub tau: f64,
    /// Velocity gate (m/frame).
    pub nu: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            theta_opp_deg: 150.0,
            opposite_pairs: None,
            tau: 0.5,
            nu: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterClass {
    Sufficient,
    Insufficient,
}

/// Classification counts distinct cameras: same-camera members have disjoint
/// frames and together act as one view.
pub fn classify_cluster(members: &[&WindowSegment2D], rig: &Rig, config: &CascadeConfig) -> ClusterClass {
    let views = camera_boxes(members);
    let cams: Vec<CameraId> = views.keys().copied().collect();
    match cams[..] {
        [] | [_] => ClusterClass::Insufficient,
        [a, b] => {
            if let Some(pairs) = &config.opposite_pairs {
                let hit = pairs.iter().any(|&(p, q)| (p, q) == (a, b) || (q, p) == (a, b));
                return if hit {
                    ClusterClass::Insufficient
                } else {
                    ClusterClass::Sufficient
                };
            }
            match median_ray_angle(rig, a, &views[&a], b, &views[&b]) {
                Some(angle) if angle.to_degrees() <= config.theta_opp_deg => ClusterClass::Sufficient,
                _ => ClusterClass::Insufficient,
            }
        }
        _ => ClusterClass::Sufficient,
    }
}

/// Filled boxes of each member, merged per camera.
pub fn camera_boxes(members: &[&WindowSegment2D]) -> BTreeMap<CameraId, BTreeMap<Frame, Bbox>> {
    let mut out: BTreeMap<CameraId, BTreeMap<Frame, Bbox>> = BTreeMap::new();
    for m in members {
        out.entry(m.camera)
            .or_default()
            .extend(m.boxes.iter().map(|(f, b)| (*f, *b)));
    }
    out
}

/// Median over shared frames of the angle at the triangulated point between
/// the two viewing rays.
pub fn median_ray_angle(
    rig: &Rig,
    cam_a: CameraId,
    boxes_a: &BTreeMap<Frame, Bbox>,
    cam_b: CameraId,
    boxes_b: &BTreeMap<Frame, Bbox>,
) -> Option<f64> {
    let (ca, cb) = (rig.camera(cam_a)?, rig.camera(cam_b)?);
    let mut angles: Vec<f64> = boxes_a
        .iter()
        .filter_map(|(f, ba)| {
            let bb = boxes_b.get(f)?;
            let x = triangulate(&[(ca, ba.center()), (cb, bb.center())]).ok()?;
            Some(ray_angle(ca, cb, &x))
        })
        .collect();
    if angles.is_empty() {
        return None;
    }
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    Some(if n % 2 == 1 {
        angles[n / 2]
    } else {
        0.5 * (angles[n / 2 - 1] + angles[n / 2])
    })
}

/// Per-frame triangulation of the members' box centers. Frames need two
/// views and at least one real (non-filled) observation.
pub fn triangulate_cluster(members: &[&WindowSegment2D], rig: &Rig) -> Tracklet3D {
    let mut out = Tracklet3D::default();
    let frames: BTreeSet<Frame> = members.iter().flat_map(|m| m.valid_frames()).collect();
    for frame in frames {
        let present: Vec<_> = members.iter().filter_map(|m| Some((m, m.boxes.get(&frame)?))).collect();
        if present.len() < 2 || !present.iter().any(|(m, _)| m.is_observed(frame)) {
            continue;
        }
        let obs: Vec<_> = present
            .iter()
            .filter_map(|(m, b)| Some((rig.camera(m.camera)?, b.center())))
            .collect();
        match triangulate(&obs) {
            Ok(x) => {
                out.points.insert(
                    frame,
                    TrackPoint {
                        position: x,
                        provenance: Provenance::Triangulated,
                        views: present.iter().map(|(m, _)| m.camera).collect(),
                    },
                );
            }
            Err(e) => log::debug!("frame {frame}: triangulation skipped: {e}"),
        }
    }
    for m in members {
        out.absorb_links(m);
    }
    out
}

/// `true` if the tracklet stays inside the tracking space and never moves
/// more than `nu` between consecutive frames.
pub fn outlier_gate(t: &Tracklet3D, space: &TrackingSpace, nu: f64) -> bool {
    if t.points.values().any(|p| !space.in_track(&p.position)) {
        return false;
    }
    let pts: Vec<_> = t.points.iter().collect();
    pts.windows(2).all(|w| {
        let ((fa, a), (fb, b)) = (w[0], w[1]);
        *fb != fa + 1 || (b.position - a.position).norm() <= nu
    })
}

/// One plane candidate per segment: each valid frame's box center is
/// back-projected onto `plane`. Frames whose ray misses the plane are skipped.
pub fn plane_candidates(unmatched: &[&WindowSegment2D], plane: &PlaneSpec, rig: &Rig) -> Vec<Tracklet3D> {
    unmatched
        .iter()
        .filter_map(|seg| {
            let cam = rig.camera(seg.camera)?;
            let mut t = Tracklet3D::default();
            for (&frame, b) in &seg.boxes {
                match ray_plane_intersect(cam, &b.center(), plane) {
                    Ok(x) => {
                        t.points.insert(
                            frame,
                            TrackPoint {
                                position: x,
                                provenance: Provenance::PlaneIntersected,
                                views: vec![seg.camera],
                            },
                        );
                    }
                    Err(e) => log::trace!("camera {} frame {frame}: {e}", seg.camera),
                }
            }
            t.absorb_links(seg);
            Some(t)
        })
        .collect()
}

/// Mean Euclidean distance over shared frames of two plane candidates.
pub fn candidate_distance(a: &Tracklet3D, b: &Tracklet3D) -> CrossViewDistance {
    let shared: Vec<f64> = a
        .points
        .iter()
        .filter_map(|(f, pa)| b.points.get(f).map(|pb| (pa.position - pb.position).norm()))
        .collect();
    if shared.is_empty() {
        return CrossViewDistance::Empty;
    }
    if !a.cameras().is_disjoint(&b.cameras()) {
        return CrossViewDistance::Infinite;
    }
    CrossViewDistance::Finite(shared.iter().sum::<f64>() / shared.len() as f64)
}

/// Clusters candidates at cutoff `tau` and averages each multi-camera
/// cluster per frame. Single-camera clusters are discarded.
pub fn plane_match_and_fuse(cands: &[Tracklet3D], tau: f64) -> Vec<Tracklet3D> {
    let dist = DistanceMatrix::from_fn(cands.len(), |i, j| candidate_distance(&cands[i], &cands[j]));
    let (clusters, _) = complete_linkage(&dist, tau);
    clusters
        .into_iter()
        .filter_map(|members| {
            let group: Vec<&Tracklet3D> = members.iter().map(|&i| &cands[i]).collect();
            let cameras: BTreeSet<_> = group.iter().flat_map(|c| c.cameras()).collect();
            (cameras.len() >= 2).then(|| fuse(&group))
        })
        .collect()
}

fn fuse(group: &[&Tracklet3D]) -> Tracklet3D {
    let mut out = Tracklet3D::default();
    let frames: BTreeSet<Frame> = group.iter().flat_map(|c| c.points.keys().copied()).collect();
    for frame in frames {
        let present: Vec<&Tracklet3D> = group
            .iter()
            .copied()
            .filter(|c| c.points.contains_key(&frame))
            .collect();
        let measured = present
            .iter()
            .any(|c| c.boxes.values().any(|per_cam| per_cam.contains_key(&frame)));
        if !measured {
            continue;
        }
        let sum = present.iter().fold(nalgebra::Vector3::zeros(), |acc, c| {
            acc + c.points[&frame].position.coords
        });
        let mut views: Vec<CameraId> = present
            .iter()
            .flat_map(|c| c.points[&frame].views.iter().copied())
            .collect();
        views.sort_unstable();
        out.points.insert(
            frame,
            TrackPoint {
                position: Point3::from(sum / present.len() as f64),
                provenance: Provenance::PlaneIntersected,
                views,
            },
        );
    }
    for c in group {
        out.links.extend(c.links.iter().copied());
        for (cam, boxes) in &c.boxes {
            out.boxes
                .entry(*cam)
                .or_default()
                .extend(boxes.iter().map(|(f, b)| (*f, *b)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Triangulation,
    Plane,
    Dropped,
}

/// Result of the cascade for one window.
#[derive(Debug, Clone, Default)]
pub struct CascadeOutput {
    /// Gated tracklets from both branches, triangulated ones first.
    pub tracklets: Vec<Tracklet3D>,
    /// Branch taken by each input cluster, in input order.
    pub routes: Vec<Branch>,
    pub gated_out: usize,
}

/// Routes each cluster to triangulation or the plane path according to
/// `mode`, then applies the outlier gate to everything produced.
pub fn cascade_window(
    segments: &[WindowSegment2D],
    clusters: &[Cluster],
    rig: &Rig,
    plane: &PlaneSpec,
    space: &TrackingSpace,
    config: &CascadeConfig,
    mode: Mode,
) -> CascadeOutput {
    let mut out = CascadeOutput::default();
    let mut produced = Vec::new();
    let mut unmatched: Vec<&WindowSegment2D> = Vec::new();

    for cluster in clusters {
        let members: Vec<&WindowSegment2D> = cluster.members.iter().map(|&i| &segments[i]).collect();
        let branch = match mode {
            Mode::PlaneOnly => Branch::Plane,
            Mode::TriangulationOnly if camera_boxes(&members).len() >= 2 => Branch::Triangulation,
            Mode::TriangulationOnly => Branch::Dropped,
            Mode::Cascade => match classify_cluster(&members, rig, config) {
                ClusterClass::Sufficient => Branch::Triangulation,
                ClusterClass::Insufficient => Branch::Plane,
            },
        };
        match branch {
            Branch::Triangulation => {
                let mut t = triangulate_cluster(&members, rig);
                attach_extent(&mut t, &members, rig);
                produced.push(t);
            }
            Branch::Plane => unmatched.extend(members),
            Branch::Dropped => {}
        }
        out.routes.push(branch);
    }

    if !unmatched.is_empty() {
        let cands = plane_candidates(&unmatched, plane, rig);
        for mut fused in plane_match_and_fuse(&cands, config.tau) {
            let members: Vec<&WindowSegment2D> = unmatched
                .iter()
                .copied()
                .filter(|s| fused.links.contains(&(s.camera, s.track_id)))
                .collect();
            attach_extent(&mut fused, &members, rig);
            produced.push(fused);
        }
    }

    for t in produced {
        if t.is_empty() {
            continue;
        }
        if outlier_gate(&t, space, config.nu) {
            out.tracklets.push(t);
        } else {
            out.gated_out += 1;
        }
    }
    out
}

fn attach_extent(t: &mut Tracklet3D, members: &[&WindowSegment2D], rig: &Rig) {
    for (frame, (top, bottom)) in top_bottom_3d(members, rig) {
        if t.points.contains_key(&frame) {
            t.top.insert(frame, top);
            t.bottom.insert(frame, bottom);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraModel;
    use crate::sv_track::Window;
    use nalgebra::{Matrix3, Vector3};

    fn k() -> Matrix3<f64> {
        Matrix3::new(1000.0, 0.0, 960.0, 0.0, 1000.0, 540.0, 0.0, 0.0, 1.0)
    }

    /// Four cameras 6 m out at 45°, 135°, 225°, 315°, 2 m high.
    fn rig() -> Rig {
        let target = Point3::new(0.0, 0.0, 1.5);
        let cams = (0..4)
            .map(|i| {
                let a = (45.0 + 90.0 * i as f64).to_radians();
                CameraModel::look_at(i, k(), Point3::new(6.0 * a.cos(), 6.0 * a.sin(), 2.0), target).unwrap()
            })
            .collect();
        Rig::new(cams).unwrap()
    }

    fn plane() -> PlaneSpec {
        PlaneSpec::new(Vector3::y(), Point3::origin()).unwrap()
    }

    fn seg_from(rig: &Rig, camera: CameraId, path: impl Fn(Frame) -> Point3) -> WindowSegment2D {
        let cam = rig.camera(camera).unwrap();
        let boxes: BTreeMap<_, _> = (0..=10)
            .map(|f| {
                let p = cam.project(&path(f)).unwrap();
                (f, Bbox::new(p.x, p.y, 100.0, 250.0))
            })
            .collect();
        WindowSegment2D {
            window: Window { start: 0, len: 10 },
            camera,
            track_id: 0,
            observed: boxes.keys().copied().collect(),
            boxes,
        }
    }

    fn on_plane(f: Frame) -> Point3 {
        Point3::new(-0.5 + 0.05 * f as f64, 0.0, 1.8 + 0.03 * f as f64)
    }

    #[test]
    fn classification_examples() {
        let rig = rig();
        let cfg = CascadeConfig::default();
        let s: Vec<_> = (0..4).map(|c| seg_from(&rig, c, on_plane)).collect();
        assert_eq!(
            classify_cluster(&[&s[0], &s[1], &s[2]], &rig, &cfg),
            ClusterClass::Sufficient
        );
        assert_eq!(
            classify_cluster(&[&s[0], &s[2]], &rig, &cfg),
            ClusterClass::Insufficient
        );
        assert_eq!(classify_cluster(&[&s[0], &s[1]], &rig, &cfg), ClusterClass::Sufficient);
        assert_eq!(classify_cluster(&[&s[3]], &rig, &cfg), ClusterClass::Insufficient);
        let angle = median_ray_angle(&rig, 0, &s[0].boxes, 2, &s[2].boxes)
            .unwrap()
            .to_degrees();
        assert!(angle > 170.0, "{angle}");

        let forced = CascadeConfig {
            opposite_pairs: Some(vec![(0, 1)]),
            ..CascadeConfig::default()
        };
        assert_eq!(
            classify_cluster(&[&s[1], &s[0]], &rig, &forced),
            ClusterClass::Insufficient
        );
        assert_eq!(
            classify_cluster(&[&s[0], &s[2]], &rig, &forced),
            ClusterClass::Sufficient
        );
    }

    #[test]
    fn triangulated_cluster_round_trip() {
        let rig = rig();
        let jump = |f: Frame| {
            let t = f as f64 / 10.0;
            Point3::new(0.3 * t, 0.0, 1.6 + 2.0 * t * (1.0 - t))
        };
        let s: Vec<_> = (0..4).map(|c| seg_from(&rig, c, jump)).collect();
        let refs: Vec<_> = s.iter().collect();
        let t = triangulate_cluster(&refs, &rig);
        assert_eq!(t.points.len(), 11);
        for (f, p) in &t.points {
            assert!((p.position - jump(*f)).norm() <= 1e-6);
            assert_eq!(p.provenance, Provenance::Triangulated);
        }
        assert_eq!(t.links.len(), 4);
    }

    #[test]
    fn filled_only_frames_are_not_triangulated() {
        let rig = rig();
        let mut a = seg_from(&rig, 0, on_plane);
        let mut b = seg_from(&rig, 1, on_plane);
        a.observed.remove(&10);
        b.observed.remove(&10);
        let t = triangulate_cluster(&[&a, &b], &rig);
        assert!(!t.points.contains_key(&10));
        assert_eq!(t.points.len(), 10);
    }

    fn straight(points: impl IntoIterator<Item = (Frame, Point3)>) -> Tracklet3D {
        let mut t = Tracklet3D::default();
        for (f, p) in points {
            t.points.insert(
                f,
                TrackPoint {
                    position: p,
                    provenance: Provenance::Triangulated,
                    views: vec![],
                },
            );
        }
        t
    }

    #[test]
    fn gate_examples() {
        let space = TrackingSpace::new([-3.0, -1.0, 0.0, 3.0, 1.0, 3.5], 1.0).unwrap();
        let slow = straight((0..10).map(|f| (f, Point3::new(-1.0 + 0.3 * f as f64 / 3.0, 0.0, 1.0))));
        assert!(outlier_gate(&slow, &space, 1.0));
        let mut far = slow.clone();
        far.points.get_mut(&4).unwrap().position = Point3::new(0.0, 7.0, 1.0);
        assert!(!outlier_gate(&far, &space, 1.0));
        let jumpy = straight([(0, Point3::new(0.0, 0.0, 1.0)), (1, Point3::new(1.2, 0.0, 1.0))]);
        assert!(!outlier_gate(&jumpy, &space, 1.0));
        // Buffer extends x and y only.
        assert!(space.in_track(&Point3::new(3.9, -1.9, 0.0)));
        assert!(!space.in_track(&Point3::new(0.0, 0.0, 3.6)));
    }

    #[test]
    fn plane_candidate_round_trip() {
        let rig = rig();
        let s = seg_from(&rig, 0, on_plane);
        let cands = plane_candidates(&[&s], &plane(), &rig);
        assert_eq!(cands.len(), 1);
        for (f, p) in &cands[0].points {
            assert!((p.position - on_plane(*f)).norm() <= 1e-9);
        }
    }

    #[test]
    fn off_plane_candidates_separate_for_adjacent_views() {
        let rig = rig();
        let off = |f: Frame| Point3::new(0.5 + 0.02 * f as f64, 1.0, 1.0);
        // Cameras 0 and 3 sit on the same side of the plane.
        let segs = [seg_from(&rig, 0, off), seg_from(&rig, 3, off)];
        let cands = plane_candidates(&[&segs[0], &segs[1]], &plane(), &rig);
        let d = candidate_distance(&cands[0], &cands[1]).finite().unwrap();
        assert!(d > 0.5, "{d}");
    }

    fn cand(camera: CameraId, offset: Vector3<f64>) -> Tracklet3D {
        let mut t = straight((0..10).map(|f| (f, Point3::new(0.1 * f as f64, 0.0, 1.0) + offset)));
        t.links.insert((camera, 0));
        t.boxes
            .insert(camera, (0..10).map(|f| (f, Bbox::new(0.0, 0.0, 1.0, 1.0))).collect());
        t
    }

    #[test]
    fn fusion_examples() {
        let a = cand(0, Vector3::zeros());
        let fused = plane_match_and_fuse(&[a.clone(), cand(2, Vector3::zeros())], 0.5);
        assert_eq!(fused.len(), 1);
        assert_eq!(fused[0].points.len(), 10);
        for (f, p) in &fused[0].points {
            assert!((p.position - a.points[f].position).norm() < 1e-15);
        }

        let fused = plane_match_and_fuse(&[cand(0, Vector3::new(0.2, 0.0, 0.0)), cand(1, Vector3::zeros())], 0.5);
        for (f, p) in &fused[0].points {
            let expect = Point3::new(0.1 * *f as f64 + 0.1, 0.0, 1.0);
            assert!((p.position - expect).norm() < 1e-12);
        }
        assert_eq!(fused[0].cameras().len(), 2);

        // Lone candidates and same-camera pairs are discarded.
        assert!(plane_match_and_fuse(&[cand(0, Vector3::zeros())], 0.5).is_empty());
        assert!(plane_match_and_fuse(&[cand(0, Vector3::zeros()), cand(0, Vector3::zeros())], 0.5).is_empty());
        assert!(
            plane_match_and_fuse(&[cand(0, Vector3::zeros()), cand(1, Vector3::new(0.0, 0.0, 0.6))], 0.5).is_empty()
        );
    }

    #[test]
    fn fusion_is_order_independent() {
        let a = cand(0, Vector3::new(0.1, 0.0, 0.0));
        let b = cand(1, Vector3::new(0.0, 0.05, 0.0));
        let c = cand(2, Vector3::new(0.0, 0.0, 0.1));
        let abc = plane_match_and_fuse(&[a.clone(), b.clone(), c.clone()], 0.5);
        let cba = plane_match_and_fuse(&[c, b, a], 0.5);
        assert_eq!(abc.len(), 1);
        for (f, p) in &abc[0].points {
            assert!((p.position - cba[0].points[f].position).norm() < 1e-15);
        }
    }

    #[test]
    fn every_cluster_takes_one_branch() {
        let rig = rig();
        let segs: Vec<_> = (0..4).map(|c| seg_from(&rig, c, on_plane)).collect();
        let clusters = vec![Cluster { members: vec![0, 1, 3] }, Cluster { members: vec![2] }];
        let space = TrackingSpace::new([-3.0, -1.0, 0.0, 3.0, 1.0, 3.5], 1.0).unwrap();
        let cfg = CascadeConfig::default();
        let out = cascade_window(&segs, &clusters, &rig, &plane(), &space, &cfg, Mode::Cascade);
        assert_eq!(out.routes, vec![Branch::Triangulation, Branch::Plane]);
        // The lone plane candidate has no partner.
        assert_eq!(out.tracklets.len(), 1);
        let tri = cascade_window(&segs, &clusters, &rig, &plane(), &space, &cfg, Mode::TriangulationOnly);
        assert_eq!(tri.routes, vec![Branch::Triangulation, Branch::Dropped]);
        assert_eq!(tri.tracklets, out.tracklets);
        let pl = cascade_window(&segs, &clusters, &rig, &plane(), &space, &cfg, Mode::PlaneOnly);
        assert_eq!(pl.routes, vec![Branch::Plane, Branch::Plane]);
        assert_eq!(pl.tracklets.len(), 1);
        assert_eq!(pl.tracklets[0].cameras().len(), 4);
    }
}
