//! Stitching per-window 3D fragments into long-lived tracks.

use std::collections::{BTreeMap, BTreeSet};

use crate::cascade::{TrackPoint, Tracklet3D};
use crate::geometry::Point3;
use crate::sv_track::{Frame, TrackId, Window};

/// Mean per-frame distance over the shared frames, `None` without overlap.
pub fn fragment_distance(a: &Tracklet3D, b: &Tracklet3D) -> Option<f64> {
    let d: Vec<f64> = a
        .points
        .iter()
        .filter_map(|(f, pa)| b.points.get(f).map(|pb| (pa.position - pb.position).norm()))
        .collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

pub fn window_distance_matrix(prev: &[Tracklet3D], next: &[Tracklet3D]) -> Vec<Vec<Option<f64>>> {
    prev.iter()
        .map(|p| next.iter().map(|n| fragment_distance(p, n)).collect())
        .collect()
}

/// Minimum-cost assignment of rows to distinct columns for a square or wide
/// matrix (`rows <= cols`). Returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // Shortest augmenting paths with potentials; index 0 is a virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if row_of[j] > 0 {
            out[row_of[j] - 1] = j - 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, d: &[Vec<Option<f64>>]) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j)| d[i][j].expect("assigned pairs have a cost"))
            .sum()
    }
}

/// Optimal assignment over the available entries of `d`; matched pairs above
/// `threshold` are split back into unmatched rows and columns.
pub fn assign(d: &[Vec<Option<f64>>], threshold: f64) -> Assignment {
    let rows = d.len();
    let cols = d.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    // Unavailable entries cost more than any full assignment of real ones,
    // so they are chosen only when unavoidable. Padding is free.
    let max_finite = d.iter().flatten().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let sentinel = 1.0 + 2.0 * n as f64 * max_finite;
    let padded: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i < rows && j < cols).then(|| d[i][j]) {
                    Some(Some(c)) => c,
                    Some(None) => sentinel,
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    let cols_of = hungarian(&padded);
    let mut out = Assignment::default();
    let mut used_cols = BTreeSet::new();
    for (i, &j) in cols_of.iter().enumerate().take(rows) {
        match d[i].get(j).copied().flatten() {
            Some(c) if c <= threshold => {
                out.pairs.push((i, j));
                used_cols.insert(j);
            }
            _ => out.unmatched_rows.push(i),
        }
    }
    out.unmatched_cols = (0..cols).filter(|j| !used_cols.contains(j)).collect();
    out
}

/// Joins `next` onto `prev`. Frames before `overlap.0` keep `prev`, frames
/// in `[overlap.0, overlap.1)` average both, later frames keep `next`; a
/// frame present on one side only keeps that side.
pub fn merge_assigned(prev: &Tracklet3D, next: &Tracklet3D, overlap: (Frame, Frame)) -> Tracklet3D {
    let (lo, hi) = overlap;
    let mut out = Tracklet3D {
        track_id: prev.track_id,
        points: merge_maps(&prev.points, &next.points, lo, hi, average_point),
        top: merge_maps(&prev.top, &next.top, lo, hi, nalgebra::center),
        bottom: merge_maps(&prev.bottom, &next.bottom, lo, hi, nalgebra::center),
        boxes: BTreeMap::new(),
        links: prev.links.union(&next.links).copied().collect(),
    };
    for (cam, old) in &prev.boxes {
        out.boxes.insert(*cam, old.range(..lo).map(|(f, b)| (*f, *b)).collect());
    }
    for (cam, new) in &next.boxes {
        out.boxes
            .entry(*cam)
            .or_default()
            .extend(new.iter().map(|(f, b)| (*f, *b)));
    }
    for (cam, id) in &next.links {
        let older: Vec<_> = prev.links.iter().filter(|(c, i)| c == cam && i != id).collect();
        let overlapping = older
            .iter()
            .any(|(c, _)| prev.boxes.get(c).is_some_and(|b| b.range(lo..).next().is_some()));
        if overlapping {
            log::debug!(
                "track {}: camera {cam} links {older:?} and {id} across windows; newer window kept",
                prev.track_id
            );
        }
    }
    out
}

fn merge_maps<T: Clone>(
    prev: &BTreeMap<Frame, T>,
    next: &BTreeMap<Frame, T>,
    lo: Frame,
    hi: Frame,
    avg: impl Fn(&T, &T) -> T,
) -> BTreeMap<Frame, T> {
    let frames: BTreeSet<Frame> = prev.keys().chain(next.keys()).copied().collect();
    frames
        .into_iter()
        .map(|f| {
            let v = match (prev.get(&f), next.get(&f)) {
                (Some(a), Some(_)) if f < lo => a.clone(),
                (Some(a), Some(b)) if f < hi => avg(a, b),
                (Some(_), Some(b)) => b.clone(),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            };
            (f, v)
        })
        .collect()
}

fn average_point(a: &TrackPoint, b: &TrackPoint) -> TrackPoint {
    let mut views: Vec<_> = a.views.iter().chain(&b.views).copied().collect();
    views.sort_unstable();
    views.dedup();
    let provenance = if b.views.len() > a.views.len() {
        b.provenance
    } else {
        a.provenance
    };
    TrackPoint {
        position: Point3::from((a.position.coords + b.position.coords) * 0.5),
        provenance,
        views,
    }
}

/// Monotone id source; ids are never reused.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: TrackId,
}

impl IdAllocator {
    pub fn new(first: TrackId) -> Self {
        Self { next: first }
    }

    pub fn fresh(&mut self) -> TrackId {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn allocate(&mut self, n: usize) -> Vec<TrackId> {
        (0..n).map(|_| self.fresh()).collect()
    }
}

/// Outcome of stitching one window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StitchReport {
    /// Track id given to each fragment, in fragment order.
    pub ids: Vec<TrackId>,
    pub matched: usize,
    pub born: usize,
    /// Tracks of the previous window that found no successor.
    pub ended: Vec<TrackId>,
}

/// Track registry advanced one window at a time.
#[derive(Debug, Clone)]
pub struct Stitcher {
    threshold: f64,
    ids: IdAllocator,
    tracks: BTreeMap<TrackId, Tracklet3D>,
    prev: Option<(Window, Vec<Tracklet3D>)>,
}

impl Stitcher {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            ids: IdAllocator::new(1),
            tracks: BTreeMap::new(),
            prev: None,
        }
    }

    pub fn tracks(&self) -> &BTreeMap<TrackId, Tracklet3D> {
        &self.tracks
    }

    pub fn into_tracks(self) -> BTreeMap<TrackId, Tracklet3D> {
        self.tracks
    }

    /// Matches the fragments of `window` against those of the previous
    /// window and merges them into the registry.
    pub fn push(&mut self, window: Window, fragments: Vec<Tracklet3D>) -> StitchReport {
        let mut report = StitchReport::default();
        let (prev_fragments, overlap) = match &self.prev {
            Some((pw, frags)) => (frags.as_slice(), (window.start, pw.end())),
            None => (&[][..], (window.start, window.start)),
        };
        let d = window_distance_matrix(prev_fragments, &fragments);
        let a = if prev_fragments.is_empty() {
            Assignment {
                unmatched_cols: (0..fragments.len()).collect(),
                ..Assignment::default()
            }
        } else {
            assign(&d, self.threshold)
        };
        let mut ids = vec![0; fragments.len()];
        for &(i, j) in &a.pairs {
            let id = prev_fragments[i].track_id;
            ids[j] = id;
            let merged = merge_assigned(&self.tracks[&id], &fragments[j], overlap);
            self.tracks.insert(id, merged);
        }
        for &j in &a.unmatched_cols {
            let id = self.ids.fresh();
            ids[j] = id;
            let mut t = fragments[j].clone();
            t.track_id = id;
            self.tracks.insert(id, t);
        }
        report.matched = a.pairs.len();
        report.born = a.unmatched_cols.len();
        report.ended = a.unmatched_rows.iter().map(|&i| prev_fragments[i].track_id).collect();
        let current: Vec<Tracklet3D> = fragments
            .into_iter()
            .zip(&ids)
            .map(|(mut f, id)| {
                f.track_id = *id;
                f
            })
            .collect();
        report.ids = ids;
        self.prev = Some((window, current));
        report
    }
}
