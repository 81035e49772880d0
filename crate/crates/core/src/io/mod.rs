//! Geometry file formats: PLY point clouds, OBJ meshes, and the JSON scene
//! manifest. Parsers are pure functions of file contents and may run
//! concurrently.

pub mod manifest;
pub mod obj;
pub mod ply;

pub use manifest::{
    read_manifest, read_manifest_str, write_manifest, GroundTruthObject, SceneManifest,
    DEFAULT_TOLERANCES_MM,
};
pub use obj::{read_obj_mesh, read_obj_str};
pub use ply::{ply_bytes, read_ply_bytes, read_ply_pointcloud, write_ply_pointcloud, PlyFormat};
