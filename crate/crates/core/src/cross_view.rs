//! Cross-camera association of same-window 2D segments.
//!
//! Segments are compared through the symmetric, scale-normalized epipolar
//! distance of their boxes and grouped by a complete-linkage clustering that
//! tolerates pairs with no common frames.

use std::cmp::Ordering;

use crate::geometry::{epipolar_point_distance, CameraId, GeometryError, Rig};
use crate::sv_track::{Bbox, WindowSegment2D};

/// Distance between two tracklets of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossViewDistance {
    Finite(f64),
    /// The tracklets share no valid frame.
    Empty,
    /// Same camera with overlapping frames: never merge.
    Infinite,
}

impl CrossViewDistance {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// Cluster-merge update: the larger of two defined distances, ignoring
    /// empty ones.
    pub fn linkage_max(self, other: Self) -> Self {
        use CrossViewDistance::*;
        match (self, other) {
            (Empty, x) | (x, Empty) => x,
            (Infinite, _) | (_, Infinite) => Infinite,
            (Finite(a), Finite(b)) => Finite(a.max(b)),
        }
    }
}

/// Symmetric two-term epipolar distance between boxes seen by two cameras.
pub fn bbox_distance(
    rig: &Rig,
    cam_i: CameraId,
    box_i: &Bbox,
    cam_j: CameraId,
    box_j: &Bbox,
) -> Result<f64, GeometryError> {
    let f_ji = rig.fundamental(cam_j, cam_i).ok_or(GeometryError::CoincidentCenters)?;
    let f_ij = rig.fundamental(cam_i, cam_j).ok_or(GeometryError::CoincidentCenters)?;
    let into_i = epipolar_point_distance(f_ji, &box_j.center(), &box_i.center(), box_i.scale())?;
    let into_j = epipolar_point_distance(f_ij, &box_i.center(), &box_j.center(), box_j.scale())?;
    Ok(into_i + into_j)
}

/// Mean box distance over the shared valid frames of two segments.
pub fn tracklet_pair_distance(a: &WindowSegment2D, b: &WindowSegment2D, rig: &Rig) -> CrossViewDistance {
    let shared: Vec<_> = a
        .boxes
        .iter()
        .filter_map(|(f, ba)| b.boxes.get(f).map(|bb| (ba, bb)))
        .collect();
    if shared.is_empty() {
        return CrossViewDistance::Empty;
    }
    if a.camera == b.camera {
        return CrossViewDistance::Infinite;
    }
    let mut sum = 0.0;
    for (ba, bb) in &shared {
        match bbox_distance(rig, a.camera, ba, b.camera, bb) {
            Ok(d) => sum += d,
            Err(e) => {
                log::debug!("unusable box pair between cameras {} and {}: {e}", a.camera, b.camera);
                return CrossViewDistance::Infinite;
            }
        }
    }
    CrossViewDistance::Finite(sum / shared.len() as f64)
}

/// Symmetric matrix of pairwise distances; the diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<CrossViewDistance>,
}

impl DistanceMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            data: vec![CrossViewDistance::Empty; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> CrossViewDistance) -> Self {
        let mut m = Self::new(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn get(&self, i: usize, j: usize) -> CrossViewDistance {
        self.data[i * self.n + j]
    }
    pub fn set(&mut self, i: usize, j: usize, d: CrossViewDistance) {
        self.data[i * self.n + j] = d;
        self.data[j * self.n + i] = d;
    }
}

/// One merge performed by [`complete_linkage`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub distance: f64,
}

/// Agglomerative clustering with the empty-aware complete-linkage update.
///
/// Repeatedly merges the closest pair of clusters while some finite distance
/// is below `cutoff`. Equal minima go to the lexicographically smallest
/// `(i, j)` where clusters are ordered by their smallest original index.
/// Returns clusters as sorted lists of original indices, ordered by their
/// first member, along with the merge log.
pub fn complete_linkage(dist: &DistanceMatrix, cutoff: f64) -> (Vec<Vec<usize>>, Vec<Merge>) {
    let n = dist.len();
    let mut d = dist.clone();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active = vec![true; n];
    let mut merges = Vec::new();
    let mut remaining = n;

    while remaining > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if let Some(v) = d.get(i, j).finite() {
                    if v < cutoff && best.is_none_or(|(bv, _, _)| v.total_cmp(&bv) == Ordering::Less) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, i, j)) = best else { break };
        // Merged cluster lives in slot i; its smallest member is i's.
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        members[i].sort_unstable();
        active[j] = false;
        remaining -= 1;
        for q in (0..n).filter(|&q| active[q] && q != i) {
            d.set(i, q, d.get(i, q).linkage_max(d.get(j, q)));
        }
        merges.push(Merge { distance: v });
    }

    let clusters = (0..n).filter(|&i| active[i]).map(|i| members[i].clone()).collect();
    (clusters, merges)
}

/// A set of same-window segments believed to show one person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Indices into the window's segment list.
    pub members: Vec<usize>,
}

pub fn segment_distance_matrix(segments: &[WindowSegment2D], rig: &Rig) -> DistanceMatrix {
    DistanceMatrix::from_fn(segments.len(), |i, j| {
        tracklet_pair_distance(&segments[i], &segments[j], rig)
    })
}

/// Groups the segments of one window into per-person clusters.
pub fn cluster_segments(segments: &[WindowSegment2D], rig: &Rig, lambda: f64) -> Vec<Cluster> {
    debug_assert!(segments.windows(2).all(|p| p[0].window == p[1].window));
    let (clusters, _) = complete_linkage(&segment_distance_matrix(segments, rig), lambda);
    clusters.into_iter().map(|members| Cluster { members }).collect()
}
