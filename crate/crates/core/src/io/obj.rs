//! Wavefront OBJ mesh reader.
//!
//! Only `v` and `f` records matter here; everything else (normals, texture
//! coordinates, groups, materials) is ignored. Polygon faces are
//! fan-triangulated. Negative indices resolve against the vertex count at
//! the face's position in the file; texture/normal sub-indices (`f a/b/c`)
//! are accepted and discarded.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, TriangleMesh};

/// Reads an OBJ file as an indexed triangle mesh.
pub fn read_obj_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_obj_str(&text)
}

/// Same as [`read_obj_mesh`] over an in-memory string.
pub fn read_obj_str(text: &str) -> Result<TriangleMesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    // Faces with resolved 0-based indices; positives are validated against
    // the final vertex count after the whole file is parsed, so meshes that
    // reference vertices defined later still load.
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut pending_max_index: usize = 0;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut words = line.split_ascii_whitespace();
        match words.next() {
            Some("v") => {
                let mut coord = |axis: &str| -> Result<f64> {
                    words
                        .next()
                        .and_then(|w| w.parse::<f64>().ok())
                        .ok_or_else(|| {
                            Error::MalformedBody(format!(
                                "line {}: vertex missing {axis} coordinate",
                                line_no + 1
                            ))
                        })
                };
                let x = coord("x")?;
                let y = coord("y")?;
                let z = coord("z")?;
                let p = Point3::new(x, y, z);
                if !p.is_finite() {
                    return Err(Error::NonFiniteValue {
                        index: vertices.len(),
                    });
                }
                vertices.push(p);
            }
            Some("f") => {
                let mut indices = Vec::new();
                for word in words {
                    let vertex_part = word.split('/').next().unwrap_or("");
                    let raw_index: i64 = vertex_part.parse().map_err(|_| {
                        Error::MalformedFace(format!(
                            "line {}: unparseable vertex index `{word}`",
                            line_no + 1
                        ))
                    })?;
                    let resolved = match raw_index {
                        0 => {
                            return Err(Error::MalformedFace(format!(
                                "line {}: OBJ indices are 1-based, got 0",
                                line_no + 1
                            )))
                        }
                        i if i > 0 => {
                            let idx = (i - 1) as usize;
                            pending_max_index = pending_max_index.max(idx);
                            idx
                        }
                        i => {
                            // Relative to the vertices seen so far.
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(Error::MalformedFace(format!(
                                    "line {}: relative index {i} reaches before the first vertex",
                                    line_no + 1
                                )));
                            }
                            vertices.len() - back
                        }
                    };
                    indices.push(resolved);
                }
                if indices.len() < 3 {
                    return Err(Error::MalformedFace(format!(
                        "line {}: face has {} vertices, need at least 3",
                        line_no + 1,
                        indices.len()
                    )));
                }
                faces.push(indices);
            }
            _ => {}
        }
    }

    if pending_max_index >= vertices.len() && !faces.is_empty() {
        return Err(Error::MalformedFace(format!(
            "face references vertex {} but file defines {}",
            pending_max_index + 1,
            vertices.len()
        )));
    }

    let mut triangles = Vec::with_capacity(faces.iter().map(|f| f.len() - 2).sum());
    for face in &faces {
        for i in 1..face.len() - 1 {
            triangles.push([face[0], face[i], face[i + 1]]);
        }
    }
    Ok(TriangleMesh {
        vertices,
        faces: triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_fan_triangulates() {
        let mesh = read_obj_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn sub_indices_stripped() {
        let mesh = read_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n").unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
        let mesh2 = read_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1//1 2//2 3//3\n").unwrap();
        assert_eq!(mesh2.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = read_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 9\n");
        assert!(matches!(err, Err(Error::MalformedFace(_))));
    }

    #[test]
    fn zero_index_rejected() {
        assert!(matches!(
            read_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"),
            Err(Error::MalformedFace(_))
        ));
    }

    #[test]
    fn negative_indices_resolve_against_current_count() {
        let mesh = read_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn negative_index_before_first_vertex_rejected() {
        assert!(matches!(
            read_obj_str("v 0 0 0\nf -1 -2 -3\n"),
            Err(Error::MalformedFace(_))
        ));
    }

    #[test]
    fn ignores_unrelated_records() {
        let mesh = read_obj_str(
            "# comment\nmtllib scene.mtl\nvn 0 0 1\nvt 0.5 0.5\no object\nv 0 0 0\nv 1 0 0\nv 0 1 0\ns off\nf 1 2 3\n",
        )
        .unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.faces.len(), 1);
    }

    #[test]
    fn triangle_count_is_arity_sum() {
        let mesh =
            read_obj_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4 5\nf 1 2 3\n")
                .unwrap();
        assert_eq!(mesh.faces.len(), (5 - 2) + (3 - 2));
    }

    #[test]
    fn faces_may_reference_later_vertices() {
        let mesh = read_obj_str("f 1 2 3\nv 0 0 0\nv 1 0 0\nv 0 1 0\n").unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }
}
