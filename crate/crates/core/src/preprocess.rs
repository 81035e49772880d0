//! Reduce registered clouds and placed ground-truth meshes to comparable
//! object-level point sets: bounding-box crop, table-height filter, and
//! mesh-to-cloud conversion.
//!
//! Crop and filter keep boundary points (closed sets) so results do not
//! depend on round-off of manifest values. Both are idempotent and commute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{AxisAlignedBox, Point3, PointCloud, TriangleMesh};

fn filter_cloud(cloud: &PointCloud, mut keep: impl FnMut(&Point3) -> bool) -> PointCloud {
    match &cloud.colors {
        None => PointCloud::new(cloud.points.iter().copied().filter(|p| keep(p)).collect()),
        Some(colors) => {
            let mut points = Vec::new();
            let mut kept_colors = Vec::new();
            for (p, c) in cloud.points.iter().zip(colors) {
                if keep(p) {
                    points.push(*p);
                    kept_colors.push(*c);
                }
            }
            PointCloud {
                points,
                colors: Some(kept_colors),
            }
        }
    }
}

/// Keeps exactly the points inside the closed box; order and colors are
/// preserved. An empty result is legal.
pub fn crop_to_box(cloud: &PointCloud, bounds: &AxisAlignedBox) -> PointCloud {
    filter_cloud(cloud, |p| bounds.contains(p))
}

/// Keeps points with `z >= table_height` (z up in the metric frame).
pub fn filter_below_height(cloud: &PointCloud, table_height: f64) -> PointCloud {
    filter_cloud(cloud, |p| p.z >= table_height)
}

/// Converts a mesh to the cloud of its vertices, in order, without
/// deduplication. Laser scans are dense enough that vertices approximate
/// the surface faithfully.
pub fn mesh_to_cloud_vertices(mesh: &TriangleMesh) -> Result<PointCloud> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(PointCloud::new(mesh.vertices.clone()))
}

fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let ab = b.to_vector() - a.to_vector();
    let ac = c.to_vector() - a.to_vector();
    0.5 * ab.cross(&ac).norm()
}

/// Draws `n` points area-uniformly over the mesh surface. Faces are chosen
/// by cumulative area, positions by uniform barycentric coordinates; the
/// whole draw sequence comes from one ChaCha8 stream seeded with `seed`, so
/// equal seeds give equal clouds.
pub fn sample_mesh_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0f64;
    for f in &mesh.faces {
        total += triangle_area(
            &mesh.vertices[f[0]],
            &mesh.vertices[f[1]],
            &mesh.vertices[f[2]],
        );
        cumulative.push(total);
    }
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::NoArea);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.gen_range(0.0..total);
        let face_idx = cumulative.partition_point(|&c| c <= u);
        let f = &mesh.faces[face_idx.min(mesh.faces.len() - 1)];
        let (a, b, c) = (
            mesh.vertices[f[0]].to_vector(),
            mesh.vertices[f[1]].to_vector(),
            mesh.vertices[f[2]].to_vector(),
        );
        let mut r1: f64 = rng.gen();
        let mut r2: f64 = rng.gen();
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        points.push(Point3::from_vector(a + r1 * (b - a) + r2 * (c - a)));
    }
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn unit_cube_mesh() -> TriangleMesh {
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let faces = vec![
            [0, 1, 3],
            [0, 3, 2], // bottom
            [4, 7, 5],
            [4, 6, 7], // top
            [0, 5, 1],
            [0, 4, 5], // front
            [2, 3, 7],
            [2, 7, 6], // back
            [0, 2, 6],
            [0, 6, 4], // left
            [1, 5, 7],
            [1, 7, 3], // right
        ];
        TriangleMesh { vertices, faces }
    }

    #[test]
    fn crop_keeps_boundary_points() {
        let bounds =
            AxisAlignedBox::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let cloud = PointCloud::new(vec![
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(1.0, 0.5, 0.5),
            Point3::new(1.0 + 1e-9, 0.5, 0.5),
        ]);
        let cropped = crop_to_box(&cloud, &bounds);
        assert_eq!(cropped.len(), 2);
        assert_eq!(cropped.points[1], Point3::new(1.0, 0.5, 0.5));
    }

    #[test]
    fn crop_all_inside_is_identity() {
        let bounds =
            AxisAlignedBox::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let cloud = PointCloud::new(vec![
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(-0.4, 0.0, 0.9),
        ]);
        assert_eq!(crop_to_box(&cloud, &bounds), cloud);
    }

    #[test]
    fn crop_fraction_statistical() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 100_000;
        let cloud = PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect(),
        );
        let octant =
            AxisAlignedBox::new(Point3::new(0.0, 0.0, 0.0), Point3::new(0.5, 0.5, 0.5)).unwrap();
        let kept = crop_to_box(&cloud, &octant).len() as f64;
        let p = 0.125;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((kept - n as f64 * p).abs() < 3.0 * sigma, "kept {kept}");
    }

    #[test]
    fn height_filter_boundary_and_split() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, -0.1),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.1),
        ]);
        let kept = filter_below_height(&cloud, 0.0);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.points[0].z, 0.0);

        let everything = filter_below_height(&cloud, -1e6);
        assert_eq!(everything, cloud);
    }

    #[test]
    fn crop_and_filter_commute_and_are_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let cloud = PointCloud::new(
            (0..2000)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect(),
        );
        let bounds =
            AxisAlignedBox::new(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5)).unwrap();
        let h = 0.1;
        let a = filter_below_height(&crop_to_box(&cloud, &bounds), h);
        let b = crop_to_box(&filter_below_height(&cloud, h), &bounds);
        assert_eq!(a, b);
        assert_eq!(crop_to_box(&a, &bounds), a);
        assert_eq!(filter_below_height(&a, h), a);
        for p in &a.points {
            assert!(bounds.contains(p) && p.z >= h);
        }
    }

    #[test]
    fn vertices_extracted_in_order_without_dedup() {
        let mesh = TriangleMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
            ],
            faces: vec![],
        };
        let cloud = mesh_to_cloud_vertices(&mesh).unwrap();
        assert_eq!(cloud.points, mesh.vertices);

        let cube = unit_cube_mesh();
        assert_eq!(mesh_to_cloud_vertices(&cube).unwrap().len(), 8);

        assert!(matches!(
            mesh_to_cloud_vertices(&TriangleMesh::default()),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn surface_samples_stay_inside_triangle() {
        let mesh = TriangleMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
        };
        let cloud = sample_mesh_surface(&mesh, 1000, 9).unwrap();
        assert_eq!(cloud.len(), 1000);
        for p in &cloud.points {
            // Barycentric coordinates of p in the triangle.
            let u = p.x / 2.0;
            let v = p.y;
            let w = 1.0 - u - v;
            assert!(u >= -1e-12 && v >= -1e-12 && w >= -1e-12);
            assert!(p.z.abs() < 1e-15);
        }
    }

    #[test]
    fn sample_counts_follow_area_ratio() {
        // Two triangles, areas 3:1.
        let mesh = TriangleMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(3.0, 0.0, 0.0),
                Point3::new(0.0, 2.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(11.0, 0.0, 0.0),
                Point3::new(10.0, 2.0, 0.0),
            ],
            faces: vec![[0, 1, 2], [3, 4, 5]],
        };
        let n = 100_000;
        let cloud = sample_mesh_surface(&mesh, n, 10).unwrap();
        let in_small = cloud.points.iter().filter(|p| p.x >= 5.0).count() as f64;
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (in_small - n as f64 * p).abs() < 3.0 * sigma,
            "small {in_small}"
        );
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mesh = unit_cube_mesh();
        let a = sample_mesh_surface(&mesh, 500, 42).unwrap();
        let b = sample_mesh_surface(&mesh, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_mesh_surface(&mesh, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_mesh_has_no_area() {
        let mesh = TriangleMesh {
            vertices: vec![Point3::new(0.0, 0.0, 0.0); 3],
            faces: vec![[0, 1, 2]],
        };
        assert!(matches!(
            sample_mesh_surface(&mesh, 10, 0),
            Err(Error::NoArea)
        ));
    }

    #[test]
    fn conversion_commutes_with_placement() {
        use crate::geom::RigidPose;
        use crate::register::place_ground_truth;
        use nalgebra::Vector3;

        let mesh = unit_cube_mesh();
        let axis = nalgebra::Unit::new_normalize(Vector3::new(0.1, 0.7, -0.3));
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, 0.9).matrix();
        let pose = RigidPose::new(rotation, Vector3::new(0.2, -0.1, 0.4)).unwrap();

        let converted_then_moved = PointCloud::new(
            mesh_to_cloud_vertices(&mesh)
                .unwrap()
                .points
                .iter()
                .map(|&p| pose.apply(p))
                .collect(),
        );
        let moved_then_converted =
            mesh_to_cloud_vertices(&place_ground_truth(&mesh, &pose)).unwrap();
        for (a, b) in converted_then_moved
            .points
            .iter()
            .zip(&moved_then_converted.points)
        {
            assert!((a.x - b.x).abs() < 1e-12);
            assert!((a.y - b.y).abs() < 1e-12);
            assert!((a.z - b.z).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_faces_never_sampled() {
        let mesh = TriangleMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(5.0, 5.0, 5.0),
            ],
            faces: vec![[3, 3, 3], [0, 1, 2]],
        };
        let cloud = sample_mesh_surface(&mesh, 1000, 11).unwrap();
        for p in &cloud.points {
            assert!(p.x < 1.5 && p.y < 1.5);
        }
    }
}
