//! Frames, rigid transforms and the ideal pinhole camera.
//!
//! Camera convention: `+z` is the optical (depth) axis, `+u` points right and
//! `+v` points down. Pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)` so its
//! centre sits at `(i + 0.5, j + 0.5)` and an image spans `[0, width) x [0, height)`.
//! There is no distortion model; `project` and `deproject` are exact inverses.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating rotation matrices.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid measurement: depth {0} must be positive and finite")]
    InvalidMeasurement(f64),
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    InvalidPixel { u: f64, v: f64, width: u32, height: u32 },
    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseConfig", into = "PoseConfig")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().chain(translation.iter()).any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("rigid transform"));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        let deviation = gram.amax().max((rotation.determinant() - 1.0).abs());
        if deviation > ORTHONORMAL_TOL {
            return Err(GeometryError::NotOrthonormal(deviation));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Quaternion in `(x, y, z, w)` order; normalized on ingest.
    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let [x, y, z, w] = q;
        let quat = nalgebra::Quaternion::new(w, x, y, z);
        let norm = quat.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeometryError::NonFinite("quaternion"));
        }
        let unit = UnitQuaternion::from_quaternion(quat);
        Self::new(*unit.to_rotation_matrix().matrix(), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Unit quaternion `(x, y, z, w)` with `w >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
        [q.i, q.j, q.k, q.w]
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotates a free vector (no translation).
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn with_translation(&self, translation: Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation,
            translation,
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// `compose(a, b)(p) == a(b(p))`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// File representation of a pose: translation in meters plus a unit
/// quaternion `(x, y, z, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseConfig {
    pub translation: [f64; 3],
    #[serde(default = "identity_quaternion")]
    pub rotation: [f64; 4],
}

fn identity_quaternion() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

impl TryFrom<PoseConfig> for RigidTransform {
    type Error = GeometryError;

    fn try_from(cfg: PoseConfig) -> Result<Self, Self::Error> {
        RigidTransform::from_quaternion(cfg.rotation, Vector3::from(cfg.translation))
    }
}

impl From<RigidTransform> for PoseConfig {
    fn from(t: RigidTransform) -> Self {
        PoseConfig {
            translation: t.translation.into(),
            rotation: t.quaternion(),
        }
    }
}

/// An oriented plane; `normal` is unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneConfig", into = "PlaneConfig")]
pub struct Plane {
    point: Vector3<f64>,
    normal: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlaneConfig {
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

impl TryFrom<PlaneConfig> for Plane {
    type Error = GeometryError;

    fn try_from(cfg: PlaneConfig) -> Result<Self, Self::Error> {
        Plane::new(Vector3::from(cfg.point), Vector3::from(cfg.normal))
    }
}

impl From<Plane> for PlaneConfig {
    fn from(p: Plane) -> Self {
        PlaneConfig {
            point: p.point.into(),
            normal: p.normal.into(),
        }
    }
}

impl Plane {
    pub fn new(point: Vector3<f64>, normal: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if !n.is_finite() || n < 1e-12 || point.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::InvalidPlane(format!(
                "point {point:?} normal {normal:?}"
            )));
        }
        Ok(Self {
            point,
            normal: normal / n,
        })
    }

    pub fn point(&self) -> &Vector3<f64> {
        &self.point
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    /// Positive on the side the normal points to.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(&(p - self.point))
    }

    /// Parallel plane shifted `distance` along the normal.
    pub fn offset(&self, distance: f64) -> Plane {
        Plane {
            point: self.point + self.normal * distance,
            normal: self.normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(c: CameraIntrinsics) -> Self {
        RawIntrinsics {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!("focal lengths {fx}, {fy}")));
        }
        if !(0.0..f64::from(width)).contains(&cx) || !(0.0..f64::from(height)).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// D435i-like colour stream downscaled to 320x240.
    pub fn downscaled_default() -> Self {
        Self {
            fx: 300.0,
            fy: 300.0,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
        }
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mean_focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..f64::from(self.width)).contains(&u) && (0.0..f64::from(self.height)).contains(&v)
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::downscaled_default()
    }
}

/// Intrinsics plus the camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidTransform,
}

/// Result of projecting a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub in_frustum: bool,
}

impl CameraModel {
    pub fn new(intrinsics: CameraIntrinsics, pose: RigidTransform) -> Self {
        Self { intrinsics, pose }
    }

    pub fn origin(&self) -> Vector3<f64> {
        *self.pose.translation()
    }

    /// World direction of the optical axis.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.pose.apply_vector(&Vector3::z())
    }

    /// Camera-frame point for pixel `(u, v)` at depth `d`, without bounds checks.
    pub fn ray_point(&self, u: f64, v: f64, d: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d)
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.inverse().apply(p)
    }
}

/// Lifts pixel `(u, v)` with depth `d` along the optical axis into the world.
pub fn deproject(u: f64, v: f64, d: f64, cam: &CameraModel) -> Result<Vector3<f64>, GeometryError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(GeometryError::InvalidMeasurement(d));
    }
    if !cam.intrinsics.contains(u, v) {
        return Err(GeometryError::InvalidPixel {
            u,
            v,
            width: cam.intrinsics.width,
            height: cam.intrinsics.height,
        });
    }
    Ok(cam.pose.apply(&cam.ray_point(u, v, d)))
}

/// Projects a world point. Points behind the camera or outside the image are
/// reported with `in_frustum = false` rather than as errors.
pub fn project(p: &Vector3<f64>, cam: &CameraModel) -> Projection {
    let pc = cam.world_to_camera(p);
    let k = &cam.intrinsics;
    let depth = pc.z;
    let (u, v) = if depth.abs() > f64::MIN_POSITIVE {
        (k.fx * pc.x / depth + k.cx, k.fy * pc.y / depth + k.cy)
    } else {
        (f64::NAN, f64::NAN)
    };
    let in_frustum = depth > 0.0 && k.contains(u, v);
    Projection { u, v, depth, in_frustum }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cam600() -> CameraModel {
        CameraModel::new(
            CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap(),
            RigidTransform::identity(),
        )
    }

    fn rotation_from(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
        let axis = nalgebra::Unit::new_normalize(Vector3::from(axis));
        *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
    }

    #[test]
    fn principal_point_lies_on_axis() {
        let p = deproject(320.0, 240.0, 2.0, &cam600()).unwrap();
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn deproject_offset_pixel() {
        // (620 - 320) / 600 * 2.0 = 1.0
        let p = deproject(620.0, 240.0, 2.0, &cam600()).unwrap();
        assert_relative_eq!(p, Vector3::new(1.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn deproject_with_translated_pose() {
        let mut cam = cam600();
        cam.pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let p = deproject(320.0, 240.0, 2.0, &cam).unwrap();
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn deproject_rejects_bad_inputs() {
        let cam = cam600();
        assert!(matches!(
            deproject(10.0, 10.0, 0.0, &cam),
            Err(GeometryError::InvalidMeasurement(_))
        ));
        assert!(matches!(
            deproject(10.0, 10.0, -1.0, &cam),
            Err(GeometryError::InvalidMeasurement(_))
        ));
        assert!(matches!(
            deproject(640.0, 10.0, 1.0, &cam),
            Err(GeometryError::InvalidPixel { .. })
        ));
        assert!(matches!(
            deproject(10.0, -0.1, 1.0, &cam),
            Err(GeometryError::InvalidPixel { .. })
        ));
    }

    #[test]
    fn project_examples() {
        let cam = cam600();
        let pr = project(&Vector3::new(1.0, 0.0, 2.0), &cam);
        assert_relative_eq!(pr.u, 620.0, epsilon = 1e-12);
        assert_relative_eq!(pr.v, 240.0, epsilon = 1e-12);
        assert_relative_eq!(pr.depth, 2.0);
        assert!(pr.in_frustum);

        let behind = project(&Vector3::new(0.0, 0.0, -1.0), &cam);
        assert!(!behind.in_frustum);

        let p = deproject(100.0, 50.0, 1.7, &cam).unwrap();
        let pr = project(&p, &cam);
        assert_relative_eq!(pr.u, 100.0, epsilon = 1e-9);
        assert_relative_eq!(pr.v, 50.0, epsilon = 1e-9);
        assert_relative_eq!(pr.depth, 1.7, epsilon = 1e-12);
        assert!(pr.in_frustum);
    }

    #[test]
    fn compose_laws() {
        let t = RigidTransform::new(rotation_from([1.0, 2.0, 0.5], 0.7), Vector3::new(0.3, -1.0, 2.0)).unwrap();
        let id = RigidTransform::identity();
        assert_relative_eq!(*compose(&t, &id).rotation(), *t.rotation(), epsilon = 1e-12);
        assert_relative_eq!(*compose(&t, &id).translation(), *t.translation(), epsilon = 1e-12);

        let e = compose(&invert(&t), &t);
        assert_relative_eq!(*e.rotation(), Matrix3::identity(), epsilon = 1e-9);
        assert_relative_eq!(*e.translation(), Vector3::zeros(), epsilon = 1e-9);

        let a = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::from_translation(Vector3::new(0.0, 2.0, 0.0));
        assert_relative_eq!(*compose(&a, &b).translation(), Vector3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn rejects_non_orthonormal() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = 1.01;
        assert!(matches!(
            RigidTransform::new(m, Vector3::zeros()),
            Err(GeometryError::NotOrthonormal(_))
        ));
        // reflection: orthogonal but det = -1
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(refl, Vector3::zeros()).is_err());
    }

    #[test]
    fn quaternion_ingest_is_normalized() {
        let t = RigidTransform::from_quaternion([0.0, 0.0, 2.0, 2.0], Vector3::zeros()).unwrap();
        let q = t.quaternion();
        let n: f64 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_relative_eq!(n, 1.0, epsilon = 1e-12);
        // 90 degrees about z
        assert_relative_eq!(t.apply(&Vector3::x()), Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn pose_roundtrips_through_json() {
        let t = RigidTransform::new(rotation_from([0.2, 1.0, -0.4], 2.1), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert_relative_eq!(*back.rotation(), *t.rotation(), epsilon = 1e-12);
        assert_relative_eq!(*back.translation(), *t.translation(), epsilon = 1e-12);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 600.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 640.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 0.0, 0.0, 640, 480).is_ok());
    }

    #[test]
    fn plane_signed_distance() {
        let p = Plane::new(Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, 2.0)).unwrap();
        assert_relative_eq!(p.signed_distance(&Vector3::new(5.0, 1.0, 1.5)), 0.5);
        assert_relative_eq!(p.offset(0.25).signed_distance(&Vector3::new(0.0, 0.0, 1.0)), -0.25);
        assert!(Plane::new(Vector3::zeros(), Vector3::zeros()).is_err());
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            0.0f64..std::f64::consts::PI,
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_filter("axis non-degenerate", |(a, _, _)| Vector3::from(*a).norm() > 1e-3)
            .prop_map(|(axis, angle, t)| {
                RigidTransform::new(rotation_from(axis, angle), Vector3::from(t)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            prop_assert!((left.rotation() - right.rotation()).amax() < 1e-9);
            prop_assert!((left.translation() - right.translation()).amax() < 1e-9);
        }

        #[test]
        fn compose_with_inverse_is_identity(t in arb_transform()) {
            let e = compose(&t, &invert(&t));
            prop_assert!((e.rotation() - Matrix3::identity()).amax() < 1e-9);
            prop_assert!(e.translation().amax() < 1e-9);
        }

        #[test]
        fn compose_applies_right_first(a in arb_transform(), b in arb_transform(), p in prop::array::uniform3(-3.0f64..3.0)) {
            let p = Vector3::from(p);
            let lhs = compose(&a, &b).apply(&p);
            let rhs = a.apply(&b.apply(&p));
            prop_assert!((lhs - rhs).amax() < 1e-9);
        }

        #[test]
        fn deproject_is_linear_in_depth(u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.05f64..10.0) {
            let cam = cam600();
            let p1 = deproject(u, v, d, &cam).unwrap();
            let p2 = deproject(u, v, 2.0 * d, &cam).unwrap();
            let o = cam.origin();
            prop_assert!(((p2 - o) - 2.0 * (p1 - o)).amax() < 1e-9);
        }

        #[test]
        fn project_inverts_deproject(pose in arb_transform(), u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.05f64..10.0) {
            let cam = CameraModel::new(cam600().intrinsics, pose);
            let p = deproject(u, v, d, &cam).unwrap();
            let pr = project(&p, &cam);
            prop_assert!((pr.u - u).abs() < 1e-6);
            prop_assert!((pr.v - v).abs() < 1e-6);
            prop_assert!((pr.depth - d).abs() < 1e-6);
        }
    }
}
