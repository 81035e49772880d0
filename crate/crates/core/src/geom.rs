//! Geometry primitives: points, clouds, meshes, boxes, and the transform
//! arithmetic shared by every other module.
//!
//! All coordinates are meters. Millimeters appear only at metric-reporting
//! boundaries (see [`crate::metrics`]).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the orthonormality and determinant checks on rotation
/// matrices accepted at construction. Inputs outside this bound are rejected,
/// never re-orthonormalized.
pub const ROTATION_TOL: f64 = 1e-9;

/// A 3D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// An ordered set of 3D points with optional per-point RGB colors.
///
/// When colors are present their count equals the point count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            colors: None,
        }
    }

    pub fn with_colors(points: Vec<Point3>, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::LengthMismatch(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        Ok(PointCloud {
            points,
            colors: Some(colors),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends all points (and colors, when both sides carry them) of `other`.
    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        match (&mut self.colors, &other.colors) {
            (Some(dst), Some(src)) => dst.extend_from_slice(src),
            (Some(_), None) | (None, Some(_)) => self.colors = None,
            (None, None) => {}
        }
    }
}

/// An indexed triangle mesh. Faces may be degenerate (raw scans contain
/// slivers); indices must stay in range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(Error::MalformedFace(format!(
                        "face {i} references vertex {v} but mesh has {} vertices",
                        vertices.len()
                    )));
                }
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }
}

/// Closed axis-aligned box, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox {
    pub min: Point3,
    pub max: Point3,
}

impl AxisAlignedBox {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidBox("non-finite corner".into()));
        }
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(Error::InvalidBox(format!(
                "min ({}, {}, {}) exceeds max ({}, {}, {})",
                min.x, min.y, min.z, max.x, max.y, max.z
            )));
        }
        Ok(AxisAlignedBox { min, max })
    }

    /// Membership test; boundary points are inside (closed box).
    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entry".into()));
    }
    let gram = r.transpose() * r;
    let dev = (gram - Matrix3::identity())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if dev > tol {
        return Err(Error::InvalidRotation(format!(
            "R^T R deviates from identity by {dev:.3e} (tolerance {tol:.0e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::InvalidRotation(format!(
            "determinant {det} is not +1 within {tol:.0e}"
        )));
    }
    Ok(())
}

/// Scale + rotation + translation mapping one frame into another:
/// `p ↦ scale · R · p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl SimilarityTransform {
    /// Validates scale positivity and rotation orthonormality
    /// (within [`ROTATION_TOL`]) before accepting the parts.
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidScale(scale));
        }
        check_rotation(&rotation, ROTATION_TOL)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(SimilarityTransform {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Maps a point: `scale · R · p + t`.
    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.scale * (self.rotation * p.to_vector()) + self.translation)
    }

    /// Composition with `inner` applied first:
    /// `self.compose(inner).apply(p) == self.apply(inner.apply(p))`.
    pub fn compose(&self, inner: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * inner.scale,
            rotation: self.rotation * inner.rotation,
            translation: self.scale * (self.rotation * inner.translation) + self.translation,
        }
    }

    /// Exact algebraic inverse; `t.compose(&t.inverse())` is the identity.
    pub fn inverse(&self) -> SimilarityTransform {
        let inv_scale = 1.0 / self.scale;
        let inv_rotation = self.rotation.transpose();
        SimilarityTransform {
            scale: inv_scale,
            rotation: inv_rotation,
            translation: -inv_scale * (inv_rotation * self.translation),
        }
    }
}

/// Rigid pose: rotation + translation, the scale-one restriction of
/// [`SimilarityTransform`]. Used to place ground-truth meshes in the metric
/// world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::with_tolerance(rotation, translation, ROTATION_TOL)
    }

    /// Same as [`RigidPose::new`] with a caller-chosen orthonormality
    /// tolerance. Manifest poses are quantized by JSON printing and are
    /// checked at 1e-6.
    pub fn with_tolerance(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tol: f64,
    ) -> Result<Self> {
        check_rotation(&rotation, tol)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(RigidPose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation * p.to_vector() + self.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot_z(angle: f64) -> Matrix3<f64> {
        Matrix3::new(
            angle.cos(),
            -angle.sin(),
            0.0,
            angle.sin(),
            angle.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }

    fn random_transform(rng: &mut ChaCha8Rng) -> SimilarityTransform {
        let axis = nalgebra::Unit::new_normalize(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix();
        let translation = Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        SimilarityTransform::new(rng.gen_range(0.2..5.0), rotation, translation).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng) -> Point3 {
        Point3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    }

    #[test]
    fn apply_identity() {
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(SimilarityTransform::identity().apply(p), p);
    }

    #[test]
    fn apply_pure_scale() {
        let t = SimilarityTransform::new(2.0, Matrix3::identity(), Vector3::zeros()).unwrap();
        assert_eq!(
            t.apply(Point3::new(1.0, 0.0, 0.0)),
            Point3::new(2.0, 0.0, 0.0)
        );
    }

    #[test]
    fn apply_rotation_and_translation() {
        // Hand multiplication: rot_z(90°)·(1,0,0) = (0,1,0), then +(1,0,0).
        let t = SimilarityTransform::new(
            1.0,
            rot_z(std::f64::consts::FRAC_PI_2),
            Vector3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        let q = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(q.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn compose_identity_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_transform(&mut rng);
        let c = SimilarityTransform::identity().compose(&t);
        assert_abs_diff_eq!(c.scale(), t.scale(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.rotation(), t.rotation(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.translation(), t.translation(), epsilon = 1e-15);
    }

    #[test]
    fn compose_matches_nested_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = random_transform(&mut rng);
            let b = random_transform(&mut rng);
            let c = a.compose(&b);
            for _ in 0..100 {
                let p = random_point(&mut rng);
                let lhs = c.apply(p);
                let rhs = a.apply(b.apply(p));
                assert_abs_diff_eq!(lhs.x, rhs.x, epsilon = 1e-9);
                assert_abs_diff_eq!(lhs.y, rhs.y, epsilon = 1e-9);
                assert_abs_diff_eq!(lhs.z, rhs.z, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn inverse_of_identity_and_pure_scale() {
        let id = SimilarityTransform::identity().inverse();
        assert_eq!(id.scale(), 1.0);
        let t = SimilarityTransform::new(2.0, Matrix3::identity(), Vector3::zeros()).unwrap();
        assert_eq!(t.inverse().scale(), 0.5);
    }

    #[test]
    fn inverse_round_trips_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let t = random_transform(&mut rng);
            let inv = t.inverse();
            for _ in 0..100 {
                let p = random_point(&mut rng);
                let q = inv.apply(t.apply(p));
                assert_abs_diff_eq!(q.x, p.x, epsilon = 1e-9);
                assert_abs_diff_eq!(q.y, p.y, epsilon = 1e-9);
                assert_abs_diff_eq!(q.z, p.z, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn similarity_scales_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let t = random_transform(&mut rng);
            let p = random_point(&mut rng);
            let q = random_point(&mut rng);
            let before = p.distance(&q);
            let after = t.apply(p).distance(&t.apply(q));
            if before > 0.0 {
                assert_abs_diff_eq!(after / before, t.scale(), epsilon = 1e-9 * t.scale());
            }
        }
    }

    #[test]
    fn composition_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let a = random_transform(&mut rng);
            let b = random_transform(&mut rng);
            let c = random_transform(&mut rng);
            let lhs = a.compose(&b).compose(&c);
            let rhs = a.compose(&b.compose(&c));
            let p = random_point(&mut rng);
            let lp = lhs.apply(p);
            let rp = rhs.apply(p);
            assert_abs_diff_eq!(lp.x, rp.x, epsilon = 1e-9);
            assert_abs_diff_eq!(lp.y, rp.y, epsilon = 1e-9);
            assert_abs_diff_eq!(lp.z, rp.z, epsilon = 1e-9);
        }
    }

    #[test]
    fn rigid_pose_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let axis = nalgebra::Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8));
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, 1.1).matrix();
        let pose = RigidPose::new(rotation, Vector3::new(0.4, -0.2, 0.9)).unwrap();
        for _ in 0..100 {
            let p = random_point(&mut rng);
            let q = random_point(&mut rng);
            let before = p.distance(&q);
            let after = pose.apply(p).distance(&pose.apply(q));
            assert_abs_diff_eq!(after, before, epsilon = 1e-12 * before.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_rotation_and_scale() {
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            SimilarityTransform::new(1.0, skew, Vector3::zeros()),
            Err(Error::InvalidRotation(_))
        ));
        let reflect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            SimilarityTransform::new(1.0, reflect, Vector3::zeros()),
            Err(Error::InvalidRotation(_))
        ));
        assert!(matches!(
            SimilarityTransform::new(0.0, Matrix3::identity(), Vector3::zeros()),
            Err(Error::InvalidScale(_))
        ));
        assert!(matches!(
            SimilarityTransform::new(-2.0, Matrix3::identity(), Vector3::zeros()),
            Err(Error::InvalidScale(_))
        ));
    }

    #[test]
    fn box_contains_is_closed() {
        let b =
            AxisAlignedBox::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(b.contains(&Point3::new(0.0, 0.5, 1.0)));
        assert!(b.contains(&Point3::new(1.0, 1.0, 1.0)));
        assert!(!b.contains(&Point3::new(1.0 + 1e-12, 0.5, 0.5)));
    }

    #[test]
    fn box_rejects_inverted_corners() {
        assert!(
            AxisAlignedBox::new(Point3::new(0.0, 0.0, 2.0), Point3::new(1.0, 1.0, 1.0)).is_err()
        );
    }

    #[test]
    fn cloud_color_length_checked() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0); 3];
        assert!(PointCloud::with_colors(pts.clone(), vec![[0, 0, 0]; 2]).is_err());
        assert!(PointCloud::with_colors(pts, vec![[0, 0, 0]; 3]).is_ok());
    }

    #[test]
    fn mesh_rejects_out_of_range_face() {
        let verts = vec![Point3::new(0.0, 0.0, 0.0); 3];
        assert!(TriangleMesh::new(verts.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(verts, vec![[0, 1, 2]]).is_ok());
    }
}
