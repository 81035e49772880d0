//! Metric registration: estimate the similarity transform that carries a
//! reconstruction from its arbitrary SfM frame into the metric world frame.
//!
//! The estimator is the closed-form SVD-based least-squares similarity fit
//! (Umeyama's method with the reflection-correcting sign matrix). Marker
//! correspondences are few and clean, so there is no outlier-rejection
//! layer; residuals are reported instead so callers can spot bad marker
//! detections.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidPose, SimilarityTransform, TriangleMesh};

/// Relative singular-value threshold below which the source configuration
/// leaves the rotation unconstrained.
pub const COLLINEARITY_TOL: f64 = 1e-9;

/// One 3D correspondence: a point in the reconstruction frame and its
/// position in the metric world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub source: Point3,
    pub target: Point3,
}

/// A set of correspondences feeding [`estimate_similarity`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<Correspondence>) -> Self {
        CorrespondenceSet { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Estimated transform plus its fit quality.
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub transform: SimilarityTransform,
    /// Root-mean-square of the per-pair residuals, meters.
    pub rms_residual: f64,
    /// `‖s·R·source + t − target‖` for each pair, meters.
    pub per_pair_residuals: Vec<f64>,
}

/// Least-squares similarity transform from source to target points.
///
/// Minimizes `Σ‖s·R·sourceᵢ + t − targetᵢ‖²` over scale, rotation and
/// translation, with `det(R) = +1` enforced via the sign-corrected SVD.
pub fn estimate_similarity(correspondences: &CorrespondenceSet) -> Result<RegistrationResult> {
    let pairs = &correspondences.pairs;
    let n = pairs.len();
    if n < 3 {
        return Err(Error::TooFewPairs(n));
    }
    for (i, c) in pairs.iter().enumerate() {
        if !(c.source.is_finite() && c.target.is_finite()) {
            return Err(Error::DegenerateConfiguration(format!(
                "non-finite correspondence at pair {i}"
            )));
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut source_mean = Vector3::zeros();
    let mut target_mean = Vector3::zeros();
    for c in pairs {
        source_mean += c.source.to_vector();
        target_mean += c.target.to_vector();
    }
    source_mean *= inv_n;
    target_mean *= inv_n;

    // Cross-covariance of centered targets against centered sources, and the
    // source variance that normalizes the scale.
    let mut cross = Matrix3::zeros();
    let mut source_var = 0.0;
    for c in pairs {
        let s = c.source.to_vector() - source_mean;
        let t = c.target.to_vector() - target_mean;
        cross += t * s.transpose();
        source_var += s.norm_squared();
    }
    cross *= inv_n;
    source_var *= inv_n;

    // Collinearity check on the centered source matrix: with all sources on
    // one line the rotation about that line is unconstrained. The singular
    // values come from the 3xN matrix itself; squaring into a Gram matrix
    // would halve the resolvable dynamic range.
    let mut centered = nalgebra::DMatrix::<f64>::zeros(3, n);
    for (j, c) in pairs.iter().enumerate() {
        centered.set_column(j, &(c.source.to_vector() - source_mean));
    }
    let mut sv: Vec<f64> = centered.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if sv[0] <= 0.0 || sv[1] <= COLLINEARITY_TOL * sv[0] {
        return Err(Error::DegenerateConfiguration(format!(
            "source points are collinear (singular values {:.3e}, {:.3e}, {:.3e})",
            sv[0], sv[1], sv[2]
        )));
    }

    let svd = cross.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::DegenerateConfiguration("SVD of cross-covariance failed".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateConfiguration("SVD of cross-covariance failed".into()))?;
    let d = svd.singular_values;

    let flip = u.determinant() * v_t.determinant() < 0.0;
    let sign = if flip { -1.0 } else { 1.0 };
    let s_mat = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = u * s_mat * v_t;

    let trace_ds = d[0] + d[1] + sign * d[2];
    let scale = trace_ds / source_var;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateConfiguration(format!(
            "estimated scale {scale} is not positive"
        )));
    }
    let translation = target_mean - scale * (rotation * source_mean);

    let transform = SimilarityTransform::new(scale, rotation, translation)?;

    let per_pair_residuals: Vec<f64> = pairs
        .iter()
        .map(|c| transform.apply(c.source).distance(&c.target))
        .collect();
    let rms_residual = (per_pair_residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();

    Ok(RegistrationResult {
        transform,
        rms_residual,
        per_pair_residuals,
    })
}

/// Maps every point of the cloud through the transform; colors and order
/// are preserved.
pub fn register_cloud(cloud: &PointCloud, transform: &SimilarityTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|&p| transform.apply(p)).collect(),
        colors: cloud.colors.clone(),
    }
}

/// Transforms all mesh vertices by the rigid pose; faces are unchanged.
pub fn place_ground_truth(mesh: &TriangleMesh, pose: &RigidPose) -> TriangleMesh {
    TriangleMesh {
        vertices: mesh.vertices.iter().map(|&v| pose.apply(v)).collect(),
        faces: mesh.faces.clone(),
    }
}
