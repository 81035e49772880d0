//! PLY 1.0 point-cloud reader and writer.
//!
//! Supports `format ascii 1.0` and `format binary_little_endian 1.0`.
//! Big-endian files are rejected. Unknown vertex properties (normals,
//! opacity, spherical-harmonic coefficients from splatting exporters) are
//! skipped by size rather than rejected, so splat PLYs load as clouds of
//! Gaussian means. Colors are read when `red`/`green`/`blue` uchar
//! properties are present.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

/// Storage format for [`write_ply_pointcloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(word: &str) -> Option<Self> {
        Some(match word {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }

    /// Parses an ASCII token at the declared precision, so an ASCII file and
    /// its binary rendering decode to identical values.
    fn parse_ascii(self, token: &str) -> Option<f64> {
        match self {
            ScalarType::F32 => token.parse::<f32>().ok().map(f64::from),
            _ => token.parse::<f64>().ok(),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(ScalarType, String),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Parsed header: storage format plus element declarations in file order.
#[derive(Debug, Clone)]
pub struct PlyHeader {
    format: PlyFormat,
    elements: Vec<ElementDecl>,
}

struct VertexLayout {
    /// Property slots of x, y, z within the vertex element.
    coord_slots: [usize; 3],
    /// Property slots of red, green, blue when all three are uchar.
    color_slots: Option<[usize; 3]>,
}

fn parse_header(data: &[u8]) -> Result<(PlyHeader, usize)> {
    let mut pos = 0usize;
    let mut lines = Vec::new();
    loop {
        let rest = &data[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::MalformedHeader("missing end_header".into()))?;
        let line = str::from_utf8(&rest[..nl])
            .map_err(|_| Error::MalformedHeader("header is not valid UTF-8".into()))?
            .trim_end_matches('\r');
        pos += nl + 1;
        if line == "end_header" {
            break;
        }
        lines.push(line.to_string());
        if pos >= data.len() {
            return Err(Error::MalformedHeader("missing end_header".into()));
        }
    }

    let mut it = lines.iter();
    match it.next().map(String::as_str) {
        Some("ply") => {}
        _ => {
            return Err(Error::MalformedHeader(
                "file does not start with `ply`".into(),
            ))
        }
    }

    let mut format = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    for line in it {
        let mut words = line.split_ascii_whitespace();
        match words.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                let kind = words.next().unwrap_or("");
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::MalformedHeader(
                            "big-endian PLY is not supported".into(),
                        ))
                    }
                    other => {
                        return Err(Error::MalformedHeader(format!(
                            "unknown format keyword `{other}`"
                        )))
                    }
                });
            }
            Some("element") => {
                let name = words
                    .next()
                    .ok_or_else(|| Error::MalformedHeader("element without name".into()))?;
                let count: usize = words.next().and_then(|w| w.parse().ok()).ok_or_else(|| {
                    Error::MalformedHeader(format!("bad count for element `{name}`"))
                })?;
                elements.push(ElementDecl {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| {
                    Error::MalformedHeader("property declared before any element".into())
                })?;
                let kind = words
                    .next()
                    .ok_or_else(|| Error::MalformedHeader("property without type".into()))?;
                if kind == "list" {
                    let count = words
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| Error::MalformedHeader("bad list count type".into()))?;
                    let item = words
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| Error::MalformedHeader("bad list item type".into()))?;
                    // Name is unused for skipping.
                    element.properties.push(Property::List { count, item });
                } else {
                    let ty = ScalarType::parse(kind).ok_or_else(|| {
                        Error::MalformedHeader(format!("unknown property type `{kind}`"))
                    })?;
                    let name = words
                        .next()
                        .ok_or_else(|| Error::MalformedHeader("property without name".into()))?;
                    element
                        .properties
                        .push(Property::Scalar(ty, name.to_string()));
                }
            }
            Some(other) => {
                return Err(Error::MalformedHeader(format!(
                    "unknown header keyword `{other}`"
                )))
            }
        }
    }

    let format =
        format.ok_or_else(|| Error::MalformedHeader("missing format declaration".into()))?;
    Ok((PlyHeader { format, elements }, pos))
}

fn vertex_layout(decl: &ElementDecl) -> Result<VertexLayout> {
    let mut coord = [None; 3];
    let mut color = [None; 3];
    for (slot, prop) in decl.properties.iter().enumerate() {
        if let Property::Scalar(ty, name) = prop {
            match name.as_str() {
                "x" => coord[0] = Some(slot),
                "y" => coord[1] = Some(slot),
                "z" => coord[2] = Some(slot),
                "red" if *ty == ScalarType::U8 => color[0] = Some(slot),
                "green" if *ty == ScalarType::U8 => color[1] = Some(slot),
                "blue" if *ty == ScalarType::U8 => color[2] = Some(slot),
                _ => {}
            }
        }
    }
    let coord_slots = match coord {
        [Some(x), Some(y), Some(z)] => [x, y, z],
        _ => {
            return Err(Error::MalformedHeader(
                "vertex element lacks x/y/z properties".into(),
            ))
        }
    };
    let color_slots = match color {
        [Some(r), Some(g), Some(b)] => Some([r, g, b]),
        _ => None,
    };
    Ok(VertexLayout {
        coord_slots,
        color_slots,
    })
}

/// Reads all vertex records of a PLY file as a point cloud, in file order.
pub fn read_ply_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ply_bytes(&data)
}

/// Same as [`read_ply_pointcloud`] over an in-memory buffer.
pub fn read_ply_bytes(data: &[u8]) -> Result<PointCloud> {
    let (header, body_start) = parse_header(data)?;
    let vertex_decl = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::MalformedHeader("no vertex element declared".into()))?;
    let layout = vertex_layout(vertex_decl)?;

    match header.format {
        PlyFormat::Ascii => read_ascii_body(&data[body_start..], &header, &layout),
        PlyFormat::BinaryLittleEndian => read_binary_body(&data[body_start..], &header, &layout),
    }
}

fn finite_point(x: f64, y: f64, z: f64, record: usize) -> Result<Point3> {
    let p = Point3::new(x, y, z);
    if !p.is_finite() {
        return Err(Error::NonFiniteValue { index: record });
    }
    Ok(p)
}

fn read_ascii_body(body: &[u8], header: &PlyHeader, layout: &VertexLayout) -> Result<PointCloud> {
    let text = str::from_utf8(body)
        .map_err(|_| Error::MalformedBody("ascii body is not valid UTF-8".into()))?;
    let mut tokens = text.split_ascii_whitespace();
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| Error::TruncatedBody(format!("ran out of data reading {what}")))
    };

    let mut points = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();

    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        if is_vertex {
            points.reserve(element.count);
        }
        for record in 0..element.count {
            let mut coords = [0.0f64; 3];
            let mut rgb = [0u8; 3];
            for (slot, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar(ty, _) => {
                        let tok = next(&element.name)?;
                        if is_vertex {
                            if let Some(axis) = layout.coord_slots.iter().position(|&s| s == slot) {
                                coords[axis] = ty.parse_ascii(tok).ok_or_else(|| {
                                    Error::MalformedBody(format!(
                                        "unparseable coordinate `{tok}` in vertex {record}"
                                    ))
                                })?;
                            } else if let Some(cs) = &layout.color_slots {
                                if let Some(ch) = cs.iter().position(|&s| s == slot) {
                                    rgb[ch] = tok.parse::<u8>().map_err(|_| {
                                        Error::MalformedBody(format!(
                                            "unparseable color `{tok}` in vertex {record}"
                                        ))
                                    })?;
                                }
                            }
                        }
                    }
                    Property::List { .. } => {
                        let tok = next(&element.name)?;
                        let n: usize = tok.parse().map_err(|_| {
                            Error::MalformedBody(format!("unparseable list count `{tok}`"))
                        })?;
                        for _ in 0..n {
                            next(&element.name)?;
                        }
                    }
                }
            }
            if is_vertex {
                points.push(finite_point(coords[0], coords[1], coords[2], record)?);
                if layout.color_slots.is_some() {
                    colors.push(rgb);
                }
            }
        }
    }

    if layout.color_slots.is_some() {
        PointCloud::with_colors(points, colors)
    } else {
        Ok(PointCloud::new(points))
    }
}

fn read_binary_body(body: &[u8], header: &PlyHeader, layout: &VertexLayout) -> Result<PointCloud> {
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if pos + n > body.len() {
            return Err(Error::TruncatedBody(format!(
                "ran out of bytes reading {what}"
            )));
        }
        let s = &body[pos..pos + n];
        pos += n;
        Ok(s)
    };

    let mut points = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();

    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        if is_vertex {
            points.reserve(element.count);
        }
        for record in 0..element.count {
            let mut coords = [0.0f64; 3];
            let mut rgb = [0u8; 3];
            for (slot, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar(ty, _) => {
                        let bytes = take(ty.size(), &element.name)?;
                        if is_vertex {
                            if let Some(axis) = layout.coord_slots.iter().position(|&s| s == slot) {
                                coords[axis] = ty.read_le(bytes);
                            } else if let Some(cs) = &layout.color_slots {
                                if let Some(ch) = cs.iter().position(|&s| s == slot) {
                                    rgb[ch] = bytes[0];
                                }
                            }
                        }
                    }
                    Property::List { count, item } => {
                        let bytes = take(count.size(), &element.name)?;
                        let n = count.read_le(bytes);
                        if !(n.is_finite() && n >= 0.0) {
                            return Err(Error::MalformedBody(format!(
                                "bad list count in element `{}`",
                                element.name
                            )));
                        }
                        take(n as usize * item.size(), &element.name)?;
                    }
                }
            }
            if is_vertex {
                points.push(finite_point(coords[0], coords[1], coords[2], record)?);
                if layout.color_slots.is_some() {
                    colors.push(rgb);
                }
            }
        }
    }

    if layout.color_slots.is_some() {
        PointCloud::with_colors(points, colors)
    } else {
        Ok(PointCloud::new(points))
    }
}

/// Writes a cloud as PLY with float32 coordinates (and uchar colors when
/// present). Reading the file back reproduces the cloud up to float32
/// quantization.
pub fn write_ply_pointcloud(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = ply_bytes(cloud, format);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// In-memory form of [`write_ply_pointcloud`].
pub fn ply_bytes(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "element vertex {}", cloud.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut text = String::new();
            for (i, p) in cloud.points.iter().enumerate() {
                let _ = write!(text, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
                if let Some(colors) = &cloud.colors {
                    let [r, g, b] = colors[i];
                    let _ = write!(text, " {r} {g} {b}");
                }
                text.push('\n');
            }
            out.extend_from_slice(text.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            let stride = 12 + if cloud.colors.is_some() { 3 } else { 0 };
            out.reserve(cloud.len() * stride);
            for (i, p) in cloud.points.iter().enumerate() {
                out.extend_from_slice(&(p.x as f32).to_le_bytes());
                out.extend_from_slice(&(p.y as f32).to_le_bytes());
                out.extend_from_slice(&(p.z as f32).to_le_bytes());
                if let Some(colors) = &cloud.colors {
                    out.extend_from_slice(&colors[i]);
                }
            }
        }
    }
    out
}
