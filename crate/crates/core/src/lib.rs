//! Geometric-accuracy evaluation of 3D scene reconstructions against
//! metric ground truth.
//!
//! The pipeline takes reconstructions exported as PLY point clouds,
//! registers them into the metric world frame from marker correspondences
//! (resolving the similarity ambiguity of structure-from-motion), places
//! laser-scanned ground-truth meshes by pose, restricts both sides to the
//! object region, and measures directional Chamfer distances, Std@tau, and
//! precision/recall/F1 at millimeter tolerances. Results aggregate across
//! scenes into comparison tables, plus error-colored cloud exports for
//! qualitative inspection.
//!
//! Internal unit is meters everywhere; millimeters appear only in reported
//! metrics. All core types are immutable after construction and safe to
//! share across threads.
//!
//! ```
//! use recon_eval::{evaluate_pair, Point3, PointCloud, ToleranceSpec};
//!
//! let ground_truth = PointCloud::new(vec![
//!     Point3::new(0.0, 0.0, 0.0),
//!     Point3::new(0.1, 0.0, 0.0),
//! ]);
//! // One point 1 mm off the surface, one 4 mm off.
//! let reconstruction = PointCloud::new(vec![
//!     Point3::new(0.0, 0.0, 0.001),
//!     Point3::new(0.1, 0.0, 0.004),
//! ]);
//!
//! let result = evaluate_pair(&reconstruction, &ground_truth, &ToleranceSpec::default())?;
//! assert!((result.cd_p_to_g_mm - 2.5).abs() < 1e-12);
//! assert_eq!(result.per_tolerance[0].precision, 0.5); // within 2 mm
//! assert_eq!(result.per_tolerance[1].precision, 1.0); // within 5 mm
//! # Ok::<(), recon_eval::Error>(())
//! ```

pub use nalgebra;

pub mod error;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod register;
pub mod report;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use geom::{AxisAlignedBox, Point3, PointCloud, RigidPose, SimilarityTransform, TriangleMesh};
pub use io::{
    read_manifest, read_obj_mesh, read_ply_pointcloud, write_ply_pointcloud, PlyFormat,
    SceneManifest,
};
pub use metrics::{evaluate_pair, DistanceProfile, MetricsResult, ToleranceSpec};
pub use pipeline::{evaluate_scene, EvaluateOptions, GtSampling, SceneEvaluation, SceneRecord};
pub use register::{estimate_similarity, register_cloud, Correspondence, CorrespondenceSet};
pub use report::{aggregate_runs, BenchmarkRun, ComparisonTable, ErrorColormap};
pub use spatial::SpatialIndex;
