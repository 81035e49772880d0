//! Synthetic ground-truth/reconstruction pairs with analytically known
//! metric values. These stand in for the physical benchmark scenes in
//! self-tests; sphere and box surfaces have closed-form expectations.
//!
//! All generators draw from a single ChaCha8 stream seeded by the caller,
//! in a fixed order, so equal parameters reproduce equal clouds byte for
//! byte.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{AxisAlignedBox, Point3, PointCloud};

/// Degradations applied to a clean cloud, in the order listed: dropout,
/// normal-direction Gaussian noise, uniform offset, appended outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSpec {
    /// Sigma of the Gaussian displacement along each point's surface
    /// normal, meters.
    pub normal_noise_sigma: f64,
    /// Probability of dropping each point, in `[0, 1)`.
    pub dropout_fraction: f64,
    /// Number of uniform outlier points appended after the other steps.
    pub outlier_count: usize,
    /// Region the outliers are drawn from.
    pub outlier_box: AxisAlignedBox,
    /// Constant translation added to every surviving point, meters.
    pub uniform_offset: Vector3<f64>,
    pub seed: u64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        DegradationSpec {
            normal_noise_sigma: 0.0,
            dropout_fraction: 0.0,
            outlier_count: 0,
            outlier_box: AxisAlignedBox {
                min: Point3::new(-1.0, -1.0, -1.0),
                max: Point3::new(1.0, 1.0, 1.0),
            },
            uniform_offset: Vector3::zeros(),
            seed: 0,
        }
    }
}

/// `n` points area-uniform on the origin-centered sphere, with outward unit
/// normals. Draw order per point: z, then azimuth.
pub fn make_sphere_cloud_with_normals(
    radius: f64,
    n: usize,
    seed: u64,
) -> (PointCloud, Vec<Vector3<f64>>) {
    assert!(radius > 0.0 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let ring = (1.0 - z * z).max(0.0).sqrt();
        let normal = Vector3::new(ring * phi.cos(), ring * phi.sin(), z);
        points.push(Point3::from_vector(radius * normal));
        normals.push(normal);
    }
    (PointCloud::new(points), normals)
}

/// Area-uniform sphere sample; see [`make_sphere_cloud_with_normals`].
pub fn make_sphere_cloud(radius: f64, n: usize, seed: u64) -> PointCloud {
    make_sphere_cloud_with_normals(radius, n, seed).0
}

/// `n` points area-uniform over the six faces of the box, with outward unit
/// normals. Faces are weighted by area; draw order per point: face selector,
/// then the two in-face coordinates.
pub fn make_box_cloud_with_normals(
    bounds: &AxisAlignedBox,
    n: usize,
    seed: u64,
) -> (PointCloud, Vec<Vector3<f64>>) {
    assert!(n >= 1);
    let d = [
        bounds.max.x - bounds.min.x,
        bounds.max.y - bounds.min.y,
        bounds.max.z - bounds.min.z,
    ];
    // Two faces per axis: the pair orthogonal to x has area dy*dz, etc.
    let face_areas = [
        d[1] * d[2],
        d[1] * d[2],
        d[0] * d[2],
        d[0] * d[2],
        d[0] * d[1],
        d[0] * d[1],
    ];
    let mut cumulative = [0.0f64; 6];
    let mut total = 0.0;
    for (c, a) in cumulative.iter_mut().zip(face_areas) {
        total += a;
        *c = total;
    }

    let mins = [bounds.min.x, bounds.min.y, bounds.min.z];
    let maxs = [bounds.max.x, bounds.max.y, bounds.max.z];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let face = if total > 0.0 {
            let u = rng.gen_range(0.0..total);
            cumulative.partition_point(|&c| c <= u).min(5)
        } else {
            0
        };
        let axis = face / 2;
        let high_side = face % 2 == 1;
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut coords = [0.0f64; 3];
        coords[axis] = if high_side { maxs[axis] } else { mins[axis] };
        coords[a1] = rng.gen_range(0.0..=1.0) * (maxs[a1] - mins[a1]) + mins[a1];
        coords[a2] = rng.gen_range(0.0..=1.0) * (maxs[a2] - mins[a2]) + mins[a2];
        points.push(Point3::new(coords[0], coords[1], coords[2]));
        let mut normal = Vector3::zeros();
        normal[axis] = if high_side { 1.0 } else { -1.0 };
        normals.push(normal);
    }
    (PointCloud::new(points), normals)
}

/// Area-uniform box-surface sample; see [`make_box_cloud_with_normals`].
pub fn make_box_cloud(bounds: &AxisAlignedBox, n: usize, seed: u64) -> PointCloud {
    make_box_cloud_with_normals(bounds, n, seed).0
}

/// Applies the degradation steps in their documented order. `normals` must
/// hold one unit vector per cloud point.
pub fn degrade(cloud: &PointCloud, normals: &[Vector3<f64>], spec: &DegradationSpec) -> PointCloud {
    assert_eq!(
        normals.len(),
        cloud.len(),
        "one surface normal per point required"
    );
    debug_assert!(normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-9));
    assert!(
        (0.0..1.0).contains(&spec.dropout_fraction),
        "dropout fraction must lie in [0, 1)"
    );
    assert!(spec.normal_noise_sigma >= 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut points: Vec<Point3>;
    let mut kept_normals: Vec<Vector3<f64>>;
    let mut colors = cloud.colors.clone();
    if spec.dropout_fraction > 0.0 {
        points = Vec::with_capacity(cloud.len());
        kept_normals = Vec::with_capacity(cloud.len());
        let mut kept_colors = cloud.colors.as_ref().map(|c| Vec::with_capacity(c.len()));
        for (i, (&p, &nrm)) in cloud.points.iter().zip(normals).enumerate() {
            if rng.gen::<f64>() >= spec.dropout_fraction {
                points.push(p);
                kept_normals.push(nrm);
                if let (Some(dst), Some(src)) = (&mut kept_colors, &cloud.colors) {
                    dst.push(src[i]);
                }
            }
        }
        colors = kept_colors;
    } else {
        points = cloud.points.clone();
        kept_normals = normals.to_vec();
    }

    if spec.normal_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.normal_noise_sigma).expect("sigma checked");
        for (p, nrm) in points.iter_mut().zip(&kept_normals) {
            let displacement = normal.sample(&mut rng);
            *p = Point3::from_vector(p.to_vector() + displacement * nrm);
        }
    }

    if spec.uniform_offset != Vector3::zeros() {
        for p in points.iter_mut() {
            *p = Point3::from_vector(p.to_vector() + spec.uniform_offset);
        }
    }

    for _ in 0..spec.outlier_count {
        let b = &spec.outlier_box;
        points.push(Point3::new(
            rng.gen_range(0.0..=1.0) * (b.max.x - b.min.x) + b.min.x,
            rng.gen_range(0.0..=1.0) * (b.max.y - b.min.y) + b.min.y,
            rng.gen_range(0.0..=1.0) * (b.max.z - b.min.z) + b.min.z,
        ));
        if let Some(c) = &mut colors {
            c.push([255, 255, 255]);
        }
    }

    PointCloud { points, colors }
}
