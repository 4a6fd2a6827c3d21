//! PLY reader/writer (ASCII and binary little-endian).
//!
//! Meshes use `vertex` properties x,y,z with optional nx,ny,nz and s,t
//! (s,t follow the OBJ texture convention, v up; flipped internally) and a
//! `face` element with a `vertex_indices` list. Point clouds are a `vertex`
//! element with optional px,py pixel coordinates.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{Point2, Point3, Vector3};

use crate::error::{GeometryError, Result};
use crate::mesh::Mesh;
use crate::pointcloud::PointCloud;

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Scalar {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            Scalar::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count_ty: Scalar, item_ty: Scalar },
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(data: &[u8], path: &Path) -> Result<Header> {
    let err = |m: String| GeometryError::Parse {
        path: path.display().to_string(),
        message: m,
    };
    let mut pos = 0usize;
    let mut lines = Vec::new();
    loop {
        let end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("unterminated header".into()))?;
        let line = std::str::from_utf8(&data[pos..pos + end])
            .map_err(|_| err("non-utf8 header".into()))?
            .trim_end_matches('\r')
            .to_string();
        pos += end + 1;
        let stop = line == "end_header";
        lines.push(line);
        if stop {
            break;
        }
    }
    if lines.first().map(String::as_str) != Some("ply") {
        return Err(err("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in &lines[1..] {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("format") => {
                format = Some(match it.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    other => return Err(err(format!("unsupported format {other:?}"))),
                });
            }
            Some("element") => {
                let name = it.next().ok_or_else(|| err("element without name".into()))?;
                let count: usize = it
                    .next()
                    .ok_or_else(|| err("element without count".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad element count: {e}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| err("property before element".into()))?;
                let first = it.next().ok_or_else(|| err("bad property".into()))?;
                if first == "list" {
                    let count_ty = Scalar::parse(it.next().unwrap_or(""))
                        .ok_or_else(|| err("bad list count type".into()))?;
                    let item_ty = Scalar::parse(it.next().unwrap_or(""))
                        .ok_or_else(|| err("bad list item type".into()))?;
                    let name = it.next().ok_or_else(|| err("list without name".into()))?;
                    elem.properties.push(Property::List {
                        name: name.to_string(),
                        count_ty,
                        item_ty,
                    });
                } else {
                    let ty = Scalar::parse(first).ok_or_else(|| err(format!("bad type {first}")))?;
                    let name = it.next().ok_or_else(|| err("property without name".into()))?;
                    elem.properties.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("comment") | Some("obj_info") | Some("end_header") | None => {}
            Some(other) => return Err(err(format!("unknown header line: {other}"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| err("missing format line".into()))?,
        elements,
        body_offset: pos,
    })
}

/// Parsed element data: per-row scalar values by property name plus list rows.
struct ElementData {
    scalars: Vec<(String, Vec<f64>)>,
    lists: Vec<(String, Vec<Vec<f64>>)>,
}

fn read_body(header: &Header, data: &[u8], path: &Path) -> Result<Vec<ElementData>> {
    let err = |m: String| GeometryError::Parse {
        path: path.display().to_string(),
        message: m,
    };
    let mut out = Vec::new();
    match header.format {
        Format::Ascii => {
            let text = std::str::from_utf8(&data[header.body_offset..])
                .map_err(|_| err("non-utf8 body".into()))?;
            let mut tokens = text.split_whitespace().peekable();
            for elem in &header.elements {
                let mut scalars: Vec<(String, Vec<f64>)> = elem
                    .properties
                    .iter()
                    .filter_map(|p| match p {
                        Property::Scalar { name, .. } => Some((name.clone(), Vec::new())),
                        _ => None,
                    })
                    .collect();
                let mut lists: Vec<(String, Vec<Vec<f64>>)> = elem
                    .properties
                    .iter()
                    .filter_map(|p| match p {
                        Property::List { name, .. } => Some((name.clone(), Vec::new())),
                        _ => None,
                    })
                    .collect();
                for _ in 0..elem.count {
                    let (mut si, mut li) = (0, 0);
                    for prop in &elem.properties {
                        match prop {
                            Property::Scalar { .. } => {
                                let v: f64 = tokens
                                    .next()
                                    .ok_or_else(|| err("truncated body".into()))?
                                    .parse()
                                    .map_err(|e| err(format!("bad scalar: {e}")))?;
                                scalars[si].1.push(v);
                                si += 1;
                            }
                            Property::List { .. } => {
                                let n: usize = tokens
                                    .next()
                                    .ok_or_else(|| err("truncated list".into()))?
                                    .parse()
                                    .map_err(|e| err(format!("bad list count: {e}")))?;
                                let mut row = Vec::with_capacity(n);
                                for _ in 0..n {
                                    let v: f64 = tokens
                                        .next()
                                        .ok_or_else(|| err("truncated list".into()))?
                                        .parse()
                                        .map_err(|e| err(format!("bad list item: {e}")))?;
                                    row.push(v);
                                }
                                lists[li].1.push(row);
                                li += 1;
                            }
                        }
                    }
                }
                out.push(ElementData { scalars, lists });
            }
        }
        Format::BinaryLe => {
            let mut pos = header.body_offset;
            for elem in &header.elements {
                let mut scalars: Vec<(String, Vec<f64>)> = elem
                    .properties
                    .iter()
                    .filter_map(|p| match p {
                        Property::Scalar { name, .. } => Some((name.clone(), Vec::new())),
                        _ => None,
                    })
                    .collect();
                let mut lists: Vec<(String, Vec<Vec<f64>>)> = elem
                    .properties
                    .iter()
                    .filter_map(|p| match p {
                        Property::List { name, .. } => Some((name.clone(), Vec::new())),
                        _ => None,
                    })
                    .collect();
                for _ in 0..elem.count {
                    let (mut si, mut li) = (0, 0);
                    for prop in &elem.properties {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                if pos + ty.size() > data.len() {
                                    return Err(err("truncated binary body".into()));
                                }
                                scalars[si].1.push(ty.read(&data[pos..]));
                                pos += ty.size();
                                si += 1;
                            }
                            Property::List { count_ty, item_ty, .. } => {
                                if pos + count_ty.size() > data.len() {
                                    return Err(err("truncated binary list".into()));
                                }
                                let n = count_ty.read(&data[pos..]) as usize;
                                pos += count_ty.size();
                                if pos + n * item_ty.size() > data.len() {
                                    return Err(err("truncated binary list items".into()));
                                }
                                let mut row = Vec::with_capacity(n);
                                for k in 0..n {
                                    row.push(item_ty.read(&data[pos + k * item_ty.size()..]));
                                }
                                pos += n * item_ty.size();
                                lists[li].1.push(row);
                                li += 1;
                            }
                        }
                    }
                }
                out.push(ElementData { scalars, lists });
            }
        }
    }
    Ok(out)
}

fn column<'a>(data: &'a ElementData, name: &str) -> Option<&'a Vec<f64>> {
    data.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v)
}

pub fn load_mesh_ply(path: &Path) -> Result<Mesh> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes, path)?;
    let body = read_body(&header, &bytes, path)?;
    let err = |m: String| GeometryError::Parse {
        path: path.display().to_string(),
        message: m,
    };
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| err("no vertex element".into()))?;
    let vdata = &body[vi];
    let xs = column(vdata, "x").ok_or_else(|| err("missing x".into()))?;
    let ys = column(vdata, "y").ok_or_else(|| err("missing y".into()))?;
    let zs = column(vdata, "z").ok_or_else(|| err("missing z".into()))?;
    let vertices: Vec<Point3<f64>> = xs
        .iter()
        .zip(ys)
        .zip(zs)
        .map(|((&x, &y), &z)| Point3::new(x, y, z))
        .collect();

    let uvs = match (column(vdata, "s"), column(vdata, "t")) {
        (Some(ss), Some(ts)) => Some(
            ss.iter()
                .zip(ts)
                .map(|(&s, &t)| Point2::new(s, 1.0 - t))
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    let normals = match (column(vdata, "nx"), column(vdata, "ny"), column(vdata, "nz")) {
        (Some(nx), Some(ny), Some(nz)) => Some(
            nx.iter()
                .zip(ny)
                .zip(nz)
                .map(|((&x, &y), &z)| {
                    let n = Vector3::new(x, y, z);
                    let len = n.norm();
                    if len > 1e-12 {
                        n / len
                    } else {
                        Vector3::new(0.0, 0.0, 1.0)
                    }
                })
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };

    let mut faces = Vec::new();
    if let Some(fi) = header.elements.iter().position(|e| e.name == "face") {
        let fdata = &body[fi];
        let rows = fdata
            .lists
            .iter()
            .find(|(n, _)| n == "vertex_indices" || n == "vertex_index")
            .map(|(_, v)| v)
            .ok_or_else(|| err("face element without vertex_indices".into()))?;
        for row in rows {
            if row.len() < 3 {
                continue;
            }
            for k in 1..row.len() - 1 {
                let tri = [row[0] as u32, row[k] as u32, row[k + 1] as u32];
                if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                    faces.push(tri);
                }
            }
        }
    }

    let mut mesh = Mesh {
        vertices,
        faces,
        uvs,
        normals,
    };
    if mesh.normals.as_ref().is_some_and(|n| n.len() != mesh.vertices.len()) {
        mesh.normals = None;
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn save_mesh_ply(mesh: &Mesh, path: &Path) -> Result<()> {
    save_mesh_ply_with_format(mesh, path, false)
}

pub fn save_mesh_ply_with_format(mesh: &Mesh, path: &Path, ascii: bool) -> Result<()> {
    let mut header = String::from("ply\n");
    header.push_str(if ascii {
        "format ascii 1.0\n"
    } else {
        "format binary_little_endian 1.0\n"
    });
    header.push_str(&format!("element vertex {}\n", mesh.vertices.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if mesh.uvs.is_some() {
        header.push_str("property double s\nproperty double t\n");
    }
    header.push_str(&format!("element face {}\n", mesh.faces.len()));
    header.push_str("property list uchar uint vertex_indices\nend_header\n");

    let mut out: Vec<u8> = header.into_bytes();
    if ascii {
        let mut body = String::new();
        for (i, v) in mesh.vertices.iter().enumerate() {
            write!(body, "{} {} {}", v.x, v.y, v.z).unwrap();
            if let Some(n) = &mesh.normals {
                write!(body, " {} {} {}", n[i].x, n[i].y, n[i].z).unwrap();
            }
            if let Some(uv) = &mesh.uvs {
                write!(body, " {} {}", uv[i].x, 1.0 - uv[i].y).unwrap();
            }
            body.push('\n');
        }
        for f in &mesh.faces {
            writeln!(body, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
        }
        out.extend_from_slice(body.as_bytes());
    } else {
        for (i, v) in mesh.vertices.iter().enumerate() {
            for c in [v.x, v.y, v.z] {
                out.extend_from_slice(&c.to_le_bytes());
            }
            if let Some(n) = &mesh.normals {
                for c in [n[i].x, n[i].y, n[i].z] {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            if let Some(uv) = &mesh.uvs {
                out.extend_from_slice(&uv[i].x.to_le_bytes());
                out.extend_from_slice(&(1.0 - uv[i].y).to_le_bytes());
            }
        }
        for f in &mesh.faces {
            out.push(3u8);
            for &i in f {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load_cloud_ply(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes, path)?;
    let body = read_body(&header, &bytes, path)?;
    let err = |m: String| GeometryError::Parse {
        path: path.display().to_string(),
        message: m,
    };
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| err("no vertex element".into()))?;
    let vdata = &body[vi];
    let xs = column(vdata, "x").ok_or_else(|| err("missing x".into()))?;
    let ys = column(vdata, "y").ok_or_else(|| err("missing y".into()))?;
    let zs = column(vdata, "z").ok_or_else(|| err("missing z".into()))?;
    let points: Vec<Point3<f64>> = xs
        .iter()
        .zip(ys)
        .zip(zs)
        .map(|((&x, &y), &z)| Point3::new(x, y, z))
        .collect();
    let pixel_coords = match (column(vdata, "px"), column(vdata, "py")) {
        (Some(px), Some(py)) => Some(
            px.iter()
                .zip(py)
                .map(|(&x, &y)| Point2::new(x, y))
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    Ok(PointCloud {
        points,
        pixel_coords,
    })
}

pub fn save_cloud_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.points.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.pixel_coords.is_some() {
        header.push_str("property double px\nproperty double py\n");
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    for (i, p) in cloud.points.iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(px) = &cloud.pixel_coords {
            out.extend_from_slice(&px[i].x.to_le_bytes());
            out.extend_from_slice(&px[i].y.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mesh() -> Mesh {
        Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.5),
                Point3::new(1.0, 1.0, -0.25),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap()
        .with_uvs(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let mesh = sample_mesh();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        save_mesh_ply(&mesh, &p).unwrap();
        let back = load_mesh_ply(&p).unwrap();
        assert_eq!(back.faces, mesh.faces);
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.uvs, mesh.uvs);
    }

    #[test]
    fn ascii_round_trip() {
        let mesh = sample_mesh();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m_ascii.ply");
        save_mesh_ply_with_format(&mesh, &p, true).unwrap();
        let back = load_mesh_ply(&p).unwrap();
        assert_eq!(back.faces, mesh.faces);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cloud_round_trip_with_pixels() {
        let cloud = PointCloud::with_pixels(
            vec![Point3::new(0.5, 1.5, -2.0), Point3::new(0.0, 0.0, 1.0)],
            vec![Point2::new(10.5, 20.5), Point2::new(1.0, 2.0)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ply");
        save_cloud_ply(&cloud, &p).unwrap();
        let back = load_cloud_ply(&p).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn writes_are_byte_deterministic() {
        let mesh = sample_mesh();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ply");
        let p2 = dir.path().join("b.ply");
        save_mesh_ply(&mesh, &p1).unwrap();
        save_mesh_ply(&mesh, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}
