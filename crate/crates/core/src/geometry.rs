//! Calibrated pinhole cameras and the multi-view primitives built on them.
//!
//! World frame is right-handed with `z` pointing up (meters). Image frame has
//! its origin at the top-left pixel, `x` to the right and `y` down. Cameras
//! store the world-to-camera rotation `R` and translation `t`, so a world point
//! `X` lands at `R X + t` in camera coordinates.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use thiserror::Error;

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
pub type CameraId = usize;

/// Minimum camera-frame depth for a point to be projectable.
pub const MIN_DEPTH: f64 = 1e-9;
/// Rays whose mutual angle is below this (radians) cannot be triangulated.
pub const PARALLEL_RAY_TOL: f64 = 1e-6;
/// `|n·v|` below this means the viewing ray runs parallel to a plane.
pub const PLANE_PARALLEL_TOL: f64 = 1e-9;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera {id}: {reason}")]
    InvalidCamera { id: CameraId, reason: String },
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("point depth {0:.3e} m is not in front of the camera")]
    DegenerateDepth(f64),
    #[error("camera centers coincide")]
    CoincidentCenters,
    #[error("epipolar line has zero direction")]
    DegenerateLine,
    #[error("normalizing scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("need at least {needed} views, got {got}")]
    InsufficientViews { needed: usize, got: usize },
    #[error("camera {0} appears more than once")]
    DuplicateCamera(CameraId),
    #[error("viewing rays are parallel")]
    IllConditioned,
    #[error("viewing ray is parallel to the plane")]
    RayParallelToPlane,
    #[error("plane intersection lies behind the camera")]
    BehindCamera,
}

/// A calibrated view: intrinsics `K`, world-to-camera extrinsics `[R|t]` and
/// the quantities derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    id: CameraId,
    k: Matrix3<f64>,
    k_inv: Matrix3<f64>,
    r: Matrix3<f64>,
    t: Vector3<f64>,
    p: Matrix3x4<f64>,
    center: Point3,
}

impl CameraModel {
    pub fn new(id: CameraId, k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, GeometryError> {
        let invalid = |reason: &str| GeometryError::InvalidCamera {
            id,
            reason: reason.to_string(),
        };
        if k.iter().chain(r.iter()).chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite entry"));
        }
        if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 {
            return Err(invalid("focal lengths must be positive"));
        }
        if k[(2, 2)] != 1.0 || k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(invalid("K must be upper triangular with K[2,2] = 1"));
        }
        let gram = r.transpose() * r - Matrix3::identity();
        if gram.amax() >= ORTHONORMAL_TOL {
            return Err(invalid("R is not orthonormal"));
        }
        if (r.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(invalid("R is not a proper rotation"));
        }
        let k_inv = k.try_inverse().ok_or_else(|| invalid("K is singular"))?;
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        let center = Point3::from(-(r.transpose() * t));
        Ok(Self {
            id,
            k,
            k_inv,
            r,
            t,
            p: k * rt,
            center,
        })
    }

    /// Camera at `eye` whose principal axis points at `target`, image `y`
    /// axis aligned with world down (`-z`).
    pub fn look_at(id: CameraId, k: Matrix3<f64>, eye: Point3, target: Point3) -> Result<Self, GeometryError> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera {
                id,
                reason: "eye and target coincide".into(),
            })?;
        let right = forward
            .cross(&Vector3::z())
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera {
                id,
                reason: "principal axis is vertical".into(),
            })?;
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye.coords);
        Self::new(id, k, r, t)
    }

    pub fn id(&self) -> CameraId {
        self.id
    }
    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.k
    }
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }
    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }
    pub fn projection(&self) -> &Matrix3x4<f64> {
        &self.p
    }
    pub fn center(&self) -> Point3 {
        self.center
    }
    pub fn principal_point(&self) -> Point2 {
        Point2::new(self.k[(0, 2)], self.k[(1, 2)])
    }
    /// Unit principal axis in world coordinates.
    pub fn principal_axis(&self) -> Vector3<f64> {
        self.r.transpose() * Vector3::z()
    }

    /// Depth of `x` along the principal axis.
    pub fn depth(&self, x: &Point3) -> f64 {
        (self.r * x.coords + self.t).z
    }

    pub fn project(&self, x: &Point3) -> Result<Point2, GeometryError> {
        let depth = self.depth(x);
        if depth <= MIN_DEPTH {
            return Err(GeometryError::DegenerateDepth(depth));
        }
        let h = self.p * x.to_homogeneous();
        Ok(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// Unit viewing ray through pixel `p`, in world coordinates.
    pub fn pixel_ray_world(&self, p: &Point2) -> Vector3<f64> {
        // Row vector times R is the same as R^T times the column vector.
        let cam = self.k_inv * Vector3::new(p.x, p.y, 1.0);
        (self.r.transpose() * cam).normalize()
    }
}

/// A plane given by a unit normal and one point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSpec {
    normal: Vector3<f64>,
    point: Point3,
}

impl PlaneSpec {
    /// Normalizes `normal`; errors on a zero or non-finite normal.
    pub fn new(normal: Vector3<f64>, point: Point3) -> Result<Self, GeometryError> {
        if !normal.iter().chain(point.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidPlane("non-finite values".into()));
        }
        let normal = normal
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidPlane("zero normal".into()))?;
        Ok(Self { normal, point })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }
    pub fn point(&self) -> Point3 {
        self.point
    }
    pub fn is_vertical(&self) -> bool {
        self.normal.z.abs() < 1e-9
    }
    pub fn signed_distance(&self, x: &Point3) -> f64 {
        self.normal.dot(&(x - self.point))
    }
}

/// Homogeneous image line `l1 x + l2 y + l3 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarLine {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl EpipolarLine {
    pub fn distance_to(&self, p: &Point2) -> Result<f64, GeometryError> {
        let norm = self.l1.hypot(self.l2);
        if norm == 0.0 {
            return Err(GeometryError::DegenerateLine);
        }
        Ok((self.l1 * p.x + self.l2 * p.y + self.l3).abs() / norm)
    }
}

/// Fundamental matrix `F` with `x_jᵀ F x_i = 0`, scaled so that its
/// largest-magnitude entry equals 1.
pub fn fundamental_matrix(cam_i: &CameraModel, cam_j: &CameraModel) -> Result<Matrix3<f64>, GeometryError> {
    if (cam_i.center - cam_j.center).norm() <= MIN_DEPTH {
        return Err(GeometryError::CoincidentCenters);
    }
    let r_rel = cam_j.r * cam_i.r.transpose();
    let t_rel = cam_j.t - r_rel * cam_i.t;
    let essential = t_rel.cross_matrix() * r_rel;
    let f = cam_j.k_inv.transpose() * essential * cam_i.k_inv;
    Ok(normalize_max_entry(&f))
}

/// Divides by the first entry (row-major) whose magnitude is the maximum.
pub fn normalize_max_entry(m: &Matrix3<f64>) -> Matrix3<f64> {
    let max = m.amax();
    if max == 0.0 {
        return *m;
    }
    let pivot = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|rc| m[rc])
        .find(|v| v.abs() >= max * (1.0 - 1e-12))
        .unwrap_or(max);
    m / pivot
}

/// Line in the target view on which the correspondent of `source` lies.
pub fn epipolar_line(f: &Matrix3<f64>, source: &Point2) -> EpipolarLine {
    let l = f * Vector3::new(source.x, source.y, 1.0);
    EpipolarLine {
        l1: l.x,
        l2: l.y,
        l3: l.z,
    }
}

/// Distance of `target` to the epipolar line of `source`, divided by
/// `target_scale` (the `|w + h|` of the target box).
pub fn epipolar_point_distance(
    f: &Matrix3<f64>,
    source: &Point2,
    target: &Point2,
    target_scale: f64,
) -> Result<f64, GeometryError> {
    if target_scale.is_nan() || target_scale <= 0.0 {
        return Err(GeometryError::InvalidScale(target_scale));
    }
    Ok(epipolar_line(f, source).distance_to(target)? / target_scale)
}

pub fn triangulate(obs: &[(&CameraModel, Point2)]) -> Result<Point3, GeometryError> {
    triangulate_min_views(obs, 2)
}

/// Least-squares reprojection triangulation: a normalized DLT estimate
/// refined by one Gauss-Newton step on the pixel residuals.
pub fn triangulate_min_views(obs: &[(&CameraModel, Point2)], min_views: usize) -> Result<Point3, GeometryError> {
    let needed = min_views.max(2);
    if obs.len() < needed {
        return Err(GeometryError::InsufficientViews { needed, got: obs.len() });
    }
    for (i, (a, _)) in obs.iter().enumerate() {
        if obs[..i].iter().any(|(b, _)| b.id == a.id) {
            return Err(GeometryError::DuplicateCamera(a.id));
        }
    }

    let rays: Vec<_> = obs.iter().map(|(c, p)| c.pixel_ray_world(p)).collect();
    let max_sin = rays
        .iter()
        .enumerate()
        .flat_map(|(i, a)| rays[i + 1..].iter().map(move |b| a.cross(b).norm()))
        .fold(0.0, f64::max);
    if max_sin < PARALLEL_RAY_TOL.sin() {
        return Err(GeometryError::IllConditioned);
    }

    // DLT in normalized camera coordinates: rows x·P3 - P1 and y·P3 - P2 of
    // [R|t] against K^-1 x.
    let mut a = nalgebra::DMatrix::<f64>::zeros(2 * obs.len(), 4);
    for (i, (cam, p)) in obs.iter().enumerate() {
        let n = cam.k_inv * Vector3::new(p.x, p.y, 1.0);
        let (u, v) = (n.x / n.z, n.y / n.z);
        for c in 0..3 {
            let row2 = cam.r[(2, c)];
            a[(2 * i, c)] = u * row2 - cam.r[(0, c)];
            a[(2 * i + 1, c)] = v * row2 - cam.r[(1, c)];
        }
        a[(2 * i, 3)] = u * cam.t.z - cam.t.x;
        a[(2 * i + 1, 3)] = v * cam.t.z - cam.t.y;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::IllConditioned)?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let h = v_t.row(min_idx);
    let h = Vector4::new(h[0], h[1], h[2], h[3]);
    if h.w.abs() <= 1e-12 * h.xyz().norm() {
        return Err(GeometryError::IllConditioned);
    }
    let estimate = Point3::from(h.xyz() / h.w);
    Ok(gauss_newton_step(obs, estimate).unwrap_or(estimate))
}

fn gauss_newton_step(obs: &[(&CameraModel, Point2)], x: Point3) -> Option<Point3> {
    let mut jtj = Matrix3::<f64>::zeros();
    let mut jtr = Vector3::<f64>::zeros();
    for (cam, p) in obs {
        if cam.depth(&x) <= MIN_DEPTH {
            return None;
        }
        let h = cam.p * x.to_homogeneous();
        let (u, v) = (h.x / h.z, h.y / h.z);
        let p0 = cam.p.fixed_view::<1, 3>(0, 0).transpose();
        let p1 = cam.p.fixed_view::<1, 3>(1, 0).transpose();
        let p2 = cam.p.fixed_view::<1, 3>(2, 0).transpose();
        let ju = (p0 - p2 * u) / h.z;
        let jv = (p1 - p2 * v) / h.z;
        jtj += ju * ju.transpose() + jv * jv.transpose();
        jtr += ju * (p.x - u) + jv * (p.y - v);
    }
    let delta = jtj.try_inverse()? * jtr;
    delta.iter().all(|d| d.is_finite()).then(|| x + delta)
}

/// Intersection of the viewing ray through `p` with `plane`.
pub fn ray_plane_intersect(cam: &CameraModel, p: &Point2, plane: &PlaneSpec) -> Result<Point3, GeometryError> {
    let v = cam.pixel_ray_world(p);
    let denom = plane.normal.dot(&v);
    if denom.abs() <= PLANE_PARALLEL_TOL {
        return Err(GeometryError::RayParallelToPlane);
    }
    let s = plane.normal.dot(&(plane.point - cam.center)) / denom;
    if s <= 0.0 {
        return Err(GeometryError::BehindCamera);
    }
    Ok(cam.center + v * s)
}

/// Angle in radians at `x` between the rays arriving from two camera centers.
pub fn ray_angle(a: &CameraModel, b: &CameraModel, x: &Point3) -> f64 {
    let da = x - a.center;
    let db = x - b.center;
    da.angle(&db)
}

/// A calibrated camera set with cached pairwise fundamental matrices.
#[derive(Debug, Clone)]
pub struct Rig {
    cameras: BTreeMap<CameraId, CameraModel>,
    fundamentals: BTreeMap<(CameraId, CameraId), Matrix3<f64>>,
}

impl Rig {
    pub fn new(cameras: Vec<CameraModel>) -> Result<Self, GeometryError> {
        let mut map = BTreeMap::new();
        for cam in cameras {
            let id = cam.id;
            if map.insert(id, cam).is_some() {
                return Err(GeometryError::DuplicateCamera(id));
            }
        }
        let mut fundamentals = BTreeMap::new();
        for (&i, ci) in &map {
            for (&j, cj) in &map {
                if i != j {
                    fundamentals.insert((i, j), fundamental_matrix(ci, cj)?);
                }
            }
        }
        Ok(Self {
            cameras: map,
            fundamentals,
        })
    }

    pub fn camera(&self, id: CameraId) -> Option<&CameraModel> {
        self.cameras.get(&id)
    }
    pub fn cameras(&self) -> impl Iterator<Item = &CameraModel> {
        self.cameras.values()
    }
    pub fn ids(&self) -> impl Iterator<Item = CameraId> + '_ {
        self.cameras.keys().copied()
    }
    pub fn len(&self) -> usize {
        self.cameras.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
    /// `F` mapping a pixel in `from` to its epipolar line in `to`.
    pub fn fundamental(&self, from: CameraId, to: CameraId) -> Option<&Matrix3<f64>> {
        self.fundamentals.get(&(from, to))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k_hd() -> Matrix3<f64> {
        Matrix3::new(1000.0, 0.0, 960.0, 0.0, 1000.0, 540.0, 0.0, 0.0, 1.0)
    }

    fn cam_a() -> CameraModel {
        CameraModel::new(0, k_hd(), Matrix3::identity(), Vector3::zeros()).unwrap()
    }

    fn cam_b() -> CameraModel {
        CameraModel::new(1, k_hd(), Matrix3::identity(), Vector3::new(-1.0, 0.0, 0.0)).unwrap()
    }

    /// Rotation whose principal axis maps to world +y (90° about x).
    fn r_facing_y() -> Matrix3<f64> {
        Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
    }

    pub(crate) fn random_camera(rng: &mut ChaCha8Rng, id: CameraId) -> CameraModel {
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let dist = rng.random_range(3.0..10.0);
        let eye = Point3::new(dist * az.cos(), dist * az.sin(), rng.random_range(0.5..4.0));
        let target = Point3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.5..2.0),
        );
        let f = rng.random_range(600.0..2000.0);
        let k = Matrix3::new(
            f,
            0.0,
            rng.random_range(300.0..1000.0),
            0.0,
            f * rng.random_range(0.95..1.05),
            rng.random_range(200.0..600.0),
            0.0,
            0.0,
            1.0,
        );
        CameraModel::look_at(id, k, eye, target).unwrap()
    }

    #[test]
    fn camera_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..50 {
            let cam = random_camera(&mut rng, i);
            let ahead = cam.center() + cam.principal_axis();
            let pp = cam.project(&ahead).unwrap();
            assert_abs_diff_eq!(pp, cam.principal_point(), epsilon = 1e-6);
            assert!((cam.rotation().determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_cameras() {
        let mut k = k_hd();
        k[(0, 0)] = -1.0;
        assert!(CameraModel::new(0, k, Matrix3::identity(), Vector3::zeros()).is_err());
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(CameraModel::new(0, k_hd(), r, Vector3::zeros()).is_err());
        let skewed = Matrix3::identity() * 1.01;
        assert!(CameraModel::new(0, k_hd(), skewed, Vector3::zeros()).is_err());
    }

    #[test]
    fn project_examples() {
        let x = Point3::new(0.0, 0.0, 5.0);
        assert_abs_diff_eq!(cam_a().project(&x).unwrap(), Point2::new(960.0, 540.0), epsilon = 1e-12);
        assert_abs_diff_eq!(cam_b().project(&x).unwrap(), Point2::new(760.0, 540.0), epsilon = 1e-12);
        assert!(matches!(
            cam_a().project(&Point3::origin()),
            Err(GeometryError::DegenerateDepth(_))
        ));
    }

    #[test]
    fn fundamental_satisfies_epipolar_constraint() {
        let f = fundamental_matrix(&cam_a(), &cam_b()).unwrap();
        let r = Vector3::new(760.0, 540.0, 1.0).dot(&(f * Vector3::new(960.0, 540.0, 1.0)));
        assert!(r.abs() <= 1e-6);
        assert_eq!(f.amax(), 1.0);
    }

    #[test]
    fn fundamental_transpose_symmetry() {
        let f_ab = fundamental_matrix(&cam_a(), &cam_b()).unwrap();
        let f_ba = fundamental_matrix(&cam_b(), &cam_a()).unwrap();
        let diff = normalize_max_entry(&f_ab.transpose()) - normalize_max_entry(&f_ba);
        assert!(diff.amax() <= 1e-9);
    }

    #[test]
    fn fundamental_random_rig_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ci = random_camera(&mut rng, 0);
        let cj = random_camera(&mut rng, 1);
        let f = fundamental_matrix(&ci, &cj).unwrap();
        for _ in 0..20 {
            let x = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..2.5),
            );
            let (pi, pj) = (ci.project(&x).unwrap(), cj.project(&x).unwrap());
            // Residual of the constraint expressed as a pixel distance.
            let d = epipolar_line(&f, &pi).distance_to(&pj).unwrap();
            assert!(d <= 1e-6, "residual {d}");
        }
    }

    #[test]
    fn coincident_centers_rejected() {
        let b = CameraModel::new(1, k_hd(), r_facing_y(), Vector3::zeros()).unwrap();
        assert_eq!(fundamental_matrix(&cam_a(), &b), Err(GeometryError::CoincidentCenters));
    }

    #[test]
    fn epipolar_distance_examples() {
        let f = fundamental_matrix(&cam_a(), &cam_b()).unwrap();
        let src = Point2::new(960.0, 540.0);
        let d = epipolar_point_distance(&f, &src, &Point2::new(760.0, 540.0), 100.0).unwrap();
        assert!(d.abs() <= 1e-6);
        // The epipolar line is horizontal (pure x baseline): shift along y.
        let d = epipolar_point_distance(&f, &src, &Point2::new(760.0, 550.0), 100.0).unwrap();
        assert_abs_diff_eq!(d, 0.1, epsilon = 1e-6);
        assert!(epipolar_point_distance(&f, &src, &src, 0.0).is_err());
    }

    #[test]
    fn epipolar_distance_random_perpendicular_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ci = random_camera(&mut rng, 0);
        let cj = random_camera(&mut rng, 1);
        let f = fundamental_matrix(&ci, &cj).unwrap();
        let x = Point3::new(0.2, -0.3, 1.1);
        let (pi, pj) = (ci.project(&x).unwrap(), cj.project(&x).unwrap());
        let l = epipolar_line(&f, &pi);
        let n = nalgebra::Vector2::new(l.l1, l.l2).normalize();
        let shifted = pj + n * 3.0;
        let d = epipolar_point_distance(&f, &pi, &shifted, 150.0).unwrap();
        assert_abs_diff_eq!(d, 0.02, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_line() {
        let l = EpipolarLine {
            l1: 0.0,
            l2: 0.0,
            l3: 1.0,
        };
        assert_eq!(l.distance_to(&Point2::origin()), Err(GeometryError::DegenerateLine));
    }

    #[test]
    fn triangulate_examples() {
        let (a, b) = (cam_a(), cam_b());
        let x = triangulate(&[(&a, Point2::new(960.0, 540.0)), (&b, Point2::new(760.0, 540.0))]).unwrap();
        assert_abs_diff_eq!(x, Point3::new(0.0, 0.0, 5.0), epsilon = 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cams: Vec<_> = (0..4).map(|i| random_camera(&mut rng, i)).collect();
        let truth = Point3::new(1.2, 0.3, 2.0);
        let obs: Vec<_> = cams.iter().map(|c| (c, c.project(&truth).unwrap())).collect();
        assert_abs_diff_eq!(triangulate(&obs).unwrap(), truth, epsilon = 1e-6);
    }

    #[test]
    fn triangulate_errors() {
        let a = cam_a();
        assert!(matches!(
            triangulate(&[(&a, Point2::new(1.0, 1.0))]),
            Err(GeometryError::InsufficientViews { .. })
        ));
        assert_eq!(
            triangulate(&[(&a, Point2::new(1.0, 1.0)), (&a, Point2::new(1.0, 1.0))]),
            Err(GeometryError::DuplicateCamera(0))
        );
        // Two cameras side by side looking at the same pixel: parallel rays.
        let b = cam_b();
        let p = Point2::new(960.0, 540.0);
        assert_eq!(triangulate(&[(&a, p), (&b, p)]), Err(GeometryError::IllConditioned));
    }

    #[test]
    fn pixel_ray_examples() {
        let a = cam_a();
        assert_abs_diff_eq!(
            a.pixel_ray_world(&Point2::new(960.0, 540.0)),
            Vector3::z(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            a.pixel_ray_world(&Point2::new(1960.0, 540.0)),
            Vector3::new(1.0, 0.0, 1.0).normalize(),
            epsilon = 1e-15
        );
        let c = CameraModel::new(2, k_hd(), r_facing_y(), Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(c.pixel_ray_world(&c.principal_point()), Vector3::y(), epsilon = 1e-9);
    }

    #[test]
    fn ray_plane_examples() {
        // Center (0,-5,0) looking along +y: t = -R c.
        let r = r_facing_y();
        let t = -(r * Vector3::new(0.0, -5.0, 0.0));
        let cam = CameraModel::new(0, k_hd(), r, t).unwrap();
        let facing = PlaneSpec::new(Vector3::y(), Point3::origin()).unwrap();
        let x = ray_plane_intersect(&cam, &cam.principal_point(), &facing).unwrap();
        assert_abs_diff_eq!(x, Point3::origin(), epsilon = 1e-9);

        let side = PlaneSpec::new(Vector3::x(), Point3::origin()).unwrap();
        assert_eq!(
            ray_plane_intersect(&cam, &cam.principal_point(), &side),
            Err(GeometryError::RayParallelToPlane)
        );
        let behind = PlaneSpec::new(Vector3::y(), Point3::new(0.0, -8.0, 0.0)).unwrap();
        assert_eq!(
            ray_plane_intersect(&cam, &cam.principal_point(), &behind),
            Err(GeometryError::BehindCamera)
        );
    }

    #[test]
    fn ray_plane_random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let plane = PlaneSpec::new(Vector3::new(0.3, 1.0, 0.0), Point3::new(0.1, 0.0, 0.0)).unwrap();
        let along = plane.normal().cross(&Vector3::z());
        for i in 0..100 {
            let cam = random_camera(&mut rng, i);
            let x = plane.point() + along * rng.random_range(-1.5..1.5) + Vector3::z() * rng.random_range(0.0..3.0);
            let Ok(p) = cam.project(&x) else { continue };
            match ray_plane_intersect(&cam, &p, &plane) {
                Ok(back) => assert!((back - x).norm() <= 1e-9),
                Err(GeometryError::RayParallelToPlane) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn plane_constructor_normalizes() {
        let p = PlaneSpec::new(Vector3::new(0.0, 2.0, 0.0), Point3::origin()).unwrap();
        assert_abs_diff_eq!(p.normal().norm(), 1.0, epsilon = 1e-12);
        assert!(p.is_vertical());
        assert!(PlaneSpec::new(Vector3::zeros(), Point3::origin()).is_err());
    }

    #[test]
    fn rig_caches_pairwise_fundamentals() {
        let rig = Rig::new(vec![cam_a(), cam_b()]).unwrap();
        assert!(rig.fundamental(0, 1).is_some());
        assert!(rig.fundamental(1, 0).is_some());
        assert!(rig.fundamental(0, 0).is_none());
        assert!(matches!(
            Rig::new(vec![cam_a(), cam_a()]),
            Err(GeometryError::DuplicateCamera(0))
        ));
    }
}
