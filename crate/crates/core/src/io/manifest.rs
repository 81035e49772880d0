//! Scene manifest: the declarative description of one evaluation scene.
//!
//! Manifests are UTF-8 JSON. Relative file paths resolve against the
//! manifest's own directory when read. Poses are row-major 4x4 matrices
//! with last row `0 0 0 1`; their rotation blocks are checked at 1e-6,
//! loose enough for values quantized by JSON printing.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{AxisAlignedBox, Point3, RigidPose};
use crate::metrics::ToleranceSpec;
use crate::register::Correspondence;

/// Default report tolerances, millimeters.
pub const DEFAULT_TOLERANCES_MM: [f64; 2] = [2.0, 5.0];

/// Orthonormality tolerance for manifest pose rotation blocks.
pub const MANIFEST_POSE_TOL: f64 = 1e-6;

/// One ground-truth object: its mesh file and metric-world pose.
#[derive(Debug, Clone)]
pub struct GroundTruthObject {
    pub mesh_path: PathBuf,
    pub pose: RigidPose,
}

/// A fully validated scene description.
#[derive(Debug, Clone)]
pub struct SceneManifest {
    pub scene_id: String,
    pub reconstruction_path: PathBuf,
    pub objects: Vec<GroundTruthObject>,
    pub crop_box: AxisAlignedBox,
    /// Up-axis cutoff, meters; points below it are table/background.
    pub table_height: f64,
    pub marker_correspondences: Option<Vec<Correspondence>>,
    pub tolerances_mm: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    scene_id: String,
    reconstruction_path: String,
    objects: Vec<ObjectDoc>,
    crop_box: BoxDoc,
    table_height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    marker_correspondences: Option<Vec<CorrespondenceDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerances_mm: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    mesh_path: String,
    pose: [[f64; 4]; 4],
}

#[derive(Serialize, Deserialize)]
struct BoxDoc {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct CorrespondenceDoc {
    source: [f64; 3],
    target: [f64; 3],
}

fn pose_from_rows(rows: &[[f64; 4]; 4], object_index: usize) -> Result<RigidPose> {
    let last = rows[3];
    if last != [0.0, 0.0, 0.0, 1.0] {
        return Err(Error::InvalidPose(format!(
            "object {object_index}: last row is [{} {} {} {}], expected [0 0 0 1]",
            last[0], last[1], last[2], last[3]
        )));
    }
    let rotation = Matrix3::new(
        rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
        rows[2][1], rows[2][2],
    );
    let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
    RigidPose::with_tolerance(rotation, translation, MANIFEST_POSE_TOL)
        .map_err(|e| Error::InvalidPose(format!("object {object_index}: {e}")))
}

fn pose_to_rows(pose: &RigidPose) -> [[f64; 4]; 4] {
    let r = pose.rotation();
    let t = pose.translation();
    [
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn validate(doc: ManifestDoc, base_dir: &Path) -> Result<SceneManifest> {
    if doc.scene_id.is_empty() {
        return Err(Error::schema("scene_id", "must not be empty"));
    }
    if doc.objects.is_empty() {
        return Err(Error::schema("objects", "at least one object is required"));
    }

    let resolve = |p: &str| -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base_dir.join(path)
        }
    };

    let mut objects = Vec::with_capacity(doc.objects.len());
    for (i, obj) in doc.objects.iter().enumerate() {
        objects.push(GroundTruthObject {
            mesh_path: resolve(&obj.mesh_path),
            pose: pose_from_rows(&obj.pose, i)?,
        });
    }

    let min = Point3::from(doc.crop_box.min);
    let max = Point3::from(doc.crop_box.max);
    let crop_box =
        AxisAlignedBox::new(min, max).map_err(|e| Error::schema("crop_box", e.to_string()))?;

    if !doc.table_height.is_finite() {
        return Err(Error::schema("table_height", "must be finite"));
    }

    let marker_correspondences = match doc.marker_correspondences {
        None => None,
        Some(raw) => {
            if raw.len() < 3 {
                return Err(Error::schema(
                    "marker_correspondences",
                    format!("got {} pairs, need at least 3", raw.len()),
                ));
            }
            let pairs: Vec<Correspondence> = raw
                .iter()
                .map(|c| Correspondence {
                    source: Point3::from(c.source),
                    target: Point3::from(c.target),
                })
                .collect();
            for (i, c) in pairs.iter().enumerate() {
                if !(c.source.is_finite() && c.target.is_finite()) {
                    return Err(Error::schema(
                        "marker_correspondences",
                        format!("pair {i} has a non-finite coordinate"),
                    ));
                }
            }
            Some(pairs)
        }
    };

    let tolerances_mm = doc
        .tolerances_mm
        .unwrap_or_else(|| DEFAULT_TOLERANCES_MM.to_vec());
    ToleranceSpec::new(tolerances_mm.clone())?;

    Ok(SceneManifest {
        scene_id: doc.scene_id,
        reconstruction_path: resolve(&doc.reconstruction_path),
        objects,
        crop_box,
        table_height: doc.table_height,
        marker_correspondences,
        tolerances_mm,
    })
}

/// Reads and fully validates a scene manifest.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<SceneManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ManifestDoc =
        serde_json::from_str(&text).map_err(|e| Error::schema("<document>", e.to_string()))?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    validate(doc, base_dir)
}

/// Parses a manifest from a string; relative paths resolve against `base_dir`.
pub fn read_manifest_str(text: &str, base_dir: &Path) -> Result<SceneManifest> {
    let doc: ManifestDoc =
        serde_json::from_str(text).map_err(|e| Error::schema("<document>", e.to_string()))?;
    validate(doc, base_dir)
}

/// Serializes a manifest as pretty JSON. Paths are written exactly as stored,
/// so keep them relative when the manifest ships next to its data files.
pub fn write_manifest(manifest: &SceneManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = ManifestDoc {
        scene_id: manifest.scene_id.clone(),
        reconstruction_path: manifest.reconstruction_path.to_string_lossy().into_owned(),
        objects: manifest
            .objects
            .iter()
            .map(|o| ObjectDoc {
                mesh_path: o.mesh_path.to_string_lossy().into_owned(),
                pose: pose_to_rows(&o.pose),
            })
            .collect(),
        crop_box: BoxDoc {
            min: manifest.crop_box.min.into(),
            max: manifest.crop_box.max.into(),
        },
        table_height: manifest.table_height,
        marker_correspondences: manifest.marker_correspondences.as_ref().map(|pairs| {
            pairs
                .iter()
                .map(|c| CorrespondenceDoc {
                    source: c.source.into(),
                    target: c.target.into(),
                })
                .collect()
        }),
        tolerances_mm: Some(manifest.tolerances_mm.clone()),
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::schema("<document>", e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
