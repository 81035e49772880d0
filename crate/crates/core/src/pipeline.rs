//! Manifest-driven scene evaluation: load, register, place ground truth,
//! preprocess, measure, and persist results.
//!
//! Per-scene JSON records are the durable artifact; CSV/Markdown tables are
//! derived views that can be re-rendered without re-running any
//! nearest-neighbor queries.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PointCloud, SimilarityTransform, TriangleMesh};
use crate::io::manifest::SceneManifest;
use crate::io::obj::read_obj_mesh;
use crate::io::ply::read_ply_pointcloud;
use crate::metrics::{
    distance_profile, metrics_from_profile, MetricsResult, ToleranceSpec, METERS_TO_MM,
};
use crate::preprocess::{
    crop_to_box, filter_below_height, mesh_to_cloud_vertices, sample_mesh_surface,
};
use crate::register::{
    estimate_similarity, place_ground_truth, register_cloud, CorrespondenceSet, RegistrationResult,
};
use crate::report::{export_error_cloud, ErrorColormap};

/// How ground-truth meshes become point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtSampling {
    /// Extract all mesh vertices (laser scans are dense enough).
    Vertices,
    /// Draw this many area-uniform surface samples per object instead;
    /// useful for sparse meshes.
    Surface(usize),
}

/// Per-scene evaluation options.
#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    /// Overrides the manifest's tolerance list when set.
    pub tolerances: Option<ToleranceSpec>,
    pub gt_sampling: GtSampling,
    /// When set, writes the preprocessed reconstruction colored by forward
    /// NN error to this path.
    pub error_cloud_path: Option<PathBuf>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            tolerances: None,
            gt_sampling: GtSampling::Vertices,
            error_cloud_path: None,
        }
    }
}

/// Outcome of one scene evaluation.
#[derive(Debug, Clone)]
pub struct SceneEvaluation {
    pub scene_id: String,
    pub metrics: MetricsResult,
    /// Similarity transform applied to the reconstruction, when the
    /// manifest carried marker correspondences.
    pub applied_transform: Option<SimilarityTransform>,
    pub registration_rms_m: Option<f64>,
}

fn load_object_mesh(path: &Path) -> Result<TriangleMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => read_obj_mesh(path),
        "ply" => {
            // PLY ground truth is consumed as its vertex cloud; faces (if
            // any) are not needed for vertex extraction.
            let cloud = read_ply_pointcloud(path)?;
            Ok(TriangleMesh {
                vertices: cloud.points,
                faces: vec![],
            })
        }
        other => Err(Error::schema(
            "objects.mesh_path",
            format!(
                "unsupported mesh extension `{other}` for {}",
                path.display()
            ),
        )),
    }
}

/// Loads, places, and converts every ground-truth object into one combined
/// cloud in the metric world frame.
pub fn load_ground_truth_cloud(
    manifest: &SceneManifest,
    sampling: GtSampling,
) -> Result<PointCloud> {
    let mut combined = PointCloud::default();
    for (index, object) in manifest.objects.iter().enumerate() {
        let mesh = load_object_mesh(&object.mesh_path)?;
        let placed = place_ground_truth(&mesh, &object.pose);
        let cloud = match sampling {
            GtSampling::Vertices => mesh_to_cloud_vertices(&placed)?,
            GtSampling::Surface(n) => sample_mesh_surface(&placed, n, index as u64)?,
        };
        combined.extend(&cloud);
    }
    Ok(combined)
}

/// Estimates the metric registration from the manifest's marker
/// correspondences and applies it to the reconstruction cloud.
pub fn register_scene(manifest: &SceneManifest) -> Result<(PointCloud, RegistrationResult)> {
    let pairs = manifest.marker_correspondences.as_ref().ok_or_else(|| {
        Error::schema(
            "marker_correspondences",
            "manifest carries no correspondences to register with",
        )
    })?;
    let registration = estimate_similarity(&CorrespondenceSet::new(pairs.clone()))?;
    let cloud = read_ply_pointcloud(&manifest.reconstruction_path)?;
    let registered = register_cloud(&cloud, &registration.transform);
    Ok((registered, registration))
}

/// Runs the full single-scene pipeline.
pub fn evaluate_scene(
    manifest: &SceneManifest,
    options: &EvaluateOptions,
) -> Result<SceneEvaluation> {
    let raw = read_ply_pointcloud(&manifest.reconstruction_path)?;

    let (reconstruction, registration) = match &manifest.marker_correspondences {
        Some(pairs) => {
            let registration = estimate_similarity(&CorrespondenceSet::new(pairs.clone()))?;
            (
                register_cloud(&raw, &registration.transform),
                Some(registration),
            )
        }
        None => (raw, None),
    };

    let ground_truth = load_ground_truth_cloud(manifest, options.gt_sampling)?;

    // Crop first, then the height filter; they commute, the order is fixed
    // for logging consistency. Both sides are restricted to the same region.
    let prepared_p = filter_below_height(
        &crop_to_box(&reconstruction, &manifest.crop_box),
        manifest.table_height,
    );
    let prepared_g = filter_below_height(
        &crop_to_box(&ground_truth, &manifest.crop_box),
        manifest.table_height,
    );
    if prepared_p.is_empty() {
        return Err(Error::EmptyCloud(
            "reconstruction cloud after crop/height filtering".into(),
        ));
    }
    if prepared_g.is_empty() {
        return Err(Error::EmptyCloud(
            "ground-truth cloud after crop/height filtering".into(),
        ));
    }

    let tolerances = match &options.tolerances {
        Some(t) => t.clone(),
        None => ToleranceSpec::new(manifest.tolerances_mm.clone())?,
    };

    let profile = distance_profile(&prepared_p, &prepared_g)?;
    let metrics = metrics_from_profile(&profile, prepared_p.len(), prepared_g.len(), &tolerances);

    if let Some(path) = &options.error_cloud_path {
        export_error_cloud(
            &prepared_p,
            &profile.forward,
            &ErrorColormap::default(),
            path,
        )?;
    }

    Ok(SceneEvaluation {
        scene_id: manifest.scene_id.clone(),
        metrics,
        applied_transform: registration.as_ref().map(|r| r.transform),
        registration_rms_m: registration.as_ref().map(|r| r.rms_residual),
    })
}

/// Serializable form of a similarity transform (row-major rotation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub scale: f64,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&SimilarityTransform> for TransformRecord {
    fn from(t: &SimilarityTransform) -> Self {
        let r = t.rotation();
        TransformRecord {
            scale: t.scale(),
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation()[0], t.translation()[1], t.translation()[2]],
        }
    }
}

impl TransformRecord {
    pub fn to_transform(&self) -> Result<SimilarityTransform> {
        let r = self.rotation;
        SimilarityTransform::new(
            self.scale,
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::new(
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ),
        )
    }
}

/// The durable per-scene JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub method: String,
    pub scene_id: String,
    pub metrics: MetricsResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied_transform: Option<TransformRecord>,
    /// Registration residual in millimeters, fixed at six decimals; a
    /// reporting quantity, unlike the full-precision transform above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration_rms_mm: Option<f64>,
}

/// Six-decimal rounding for reported residuals (sub-micrometer in mm).
pub fn round_residual_mm(meters: f64) -> f64 {
    (meters * METERS_TO_MM * 1e6).round() / 1e6
}

impl SceneRecord {
    pub fn from_evaluation(method: impl Into<String>, eval: &SceneEvaluation) -> Self {
        SceneRecord {
            method: method.into(),
            scene_id: eval.scene_id.clone(),
            metrics: eval.metrics.clone(),
            applied_transform: eval.applied_transform.as_ref().map(TransformRecord::from),
            registration_rms_mm: eval.registration_rms_m.map(round_residual_mm),
        }
    }
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::schema("<record>", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn write_scene_record(record: &SceneRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pretty_json(record)?).map_err(|e| Error::io(path, e))
}

pub fn read_scene_record(path: impl AsRef<Path>) -> Result<SceneRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema("<record>", e.to_string()))
}

/// JSON artifact of a standalone registration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub scene_id: String,
    pub transform: TransformRecord,
    pub rms_residual_mm: f64,
    pub per_pair_residuals_mm: Vec<f64>,
}

impl RegistrationRecord {
    pub fn new(scene_id: impl Into<String>, registration: &RegistrationResult) -> Self {
        RegistrationRecord {
            scene_id: scene_id.into(),
            transform: TransformRecord::from(&registration.transform),
            rms_residual_mm: round_residual_mm(registration.rms_residual),
            per_pair_residuals_mm: registration
                .per_pair_residuals
                .iter()
                .map(|&r| round_residual_mm(r))
                .collect(),
        }
    }
}

pub fn write_registration_record(
    record: &RegistrationRecord,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pretty_json(record)?).map_err(|e| Error::io(path, e))
}
