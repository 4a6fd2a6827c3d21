//! Wavefront OBJ reader/writer for triangle meshes.
//!
//! OBJ stores `vt` with v pointing up; internally v points down (image
//! convention), so v is flipped on both paths. Faces with per-corner UV or
//! normal indices that disagree with the position index are split into
//! distinct vertices. Polygons triangulate as fans; degenerate faces are
//! dropped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point2, Point3, Vector3};

use crate::error::{GeometryError, Result};
use crate::mesh::Mesh;

pub fn save_obj(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    if let Some(uvs) = &mesh.uvs {
        for uv in uvs {
            writeln!(out, "vt {} {}", uv.x, 1.0 - uv.y).unwrap();
        }
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            writeln!(out, "vn {} {} {}", n.x, n.y, n.z).unwrap();
        }
    }
    let has_uv = mesh.uvs.is_some();
    let has_n = mesh.normals.is_some();
    for f in &mesh.faces {
        let idx = |i: u32| i + 1;
        let corner = |i: u32| match (has_uv, has_n) {
            (false, false) => format!("{}", idx(i)),
            (true, false) => format!("{}/{}", idx(i), idx(i)),
            (false, true) => format!("{}//{}", idx(i), idx(i)),
            (true, true) => format!("{}/{}/{}", idx(i), idx(i), idx(i)),
        };
        writeln!(out, "f {} {} {}", corner(f[0]), corner(f[1]), corner(f[2])).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_obj(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    let err = |message: String| GeometryError::Parse {
        path: path.display().to_string(),
        message,
    };

    let mut positions: Vec<Point3<f64>> = Vec::new();
    let mut uvs: Vec<Point2<f64>> = Vec::new();
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    // (pos, uv, normal) triple -> output vertex id
    let mut remap: HashMap<(u32, i64, i64), u32> = HashMap::new();
    let mut out_vertices: Vec<Point3<f64>> = Vec::new();
    let mut out_uvs: Vec<Point2<f64>> = Vec::new();
    let mut out_normals: Vec<Vector3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        let parse_f = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| err(format!("line {}: missing coordinate", ln + 1)))?
                .parse()
                .map_err(|e| err(format!("line {}: {e}", ln + 1)))
        };
        match tag {
            "v" => {
                let (x, y, z) = (parse_f(it.next())?, parse_f(it.next())?, parse_f(it.next())?);
                positions.push(Point3::new(x, y, z));
            }
            "vt" => {
                let (u, v) = (parse_f(it.next())?, parse_f(it.next())?);
                uvs.push(Point2::new(u, 1.0 - v));
            }
            "vn" => {
                let (x, y, z) = (parse_f(it.next())?, parse_f(it.next())?, parse_f(it.next())?);
                normals.push(Vector3::new(x, y, z));
            }
            "f" => {
                let mut corners: Vec<u32> = Vec::new();
                for spec in it {
                    let mut parts = spec.split('/');
                    let resolve = |s: &str, count: usize| -> Result<u32> {
                        let v: i64 = s.parse().map_err(|e| err(format!("line {}: {e}", ln + 1)))?;
                        let idx = if v < 0 { count as i64 + v } else { v - 1 };
                        if idx < 0 || idx >= count as i64 {
                            return Err(err(format!("line {}: index {v} out of range", ln + 1)));
                        }
                        Ok(idx as u32)
                    };
                    let pos = resolve(
                        parts.next().ok_or_else(|| err(format!("line {}: bad face", ln + 1)))?,
                        positions.len(),
                    )?;
                    let uv = match parts.next() {
                        Some("") | None => -1i64,
                        Some(s) => resolve(s, uvs.len())? as i64,
                    };
                    let nrm = match parts.next() {
                        Some("") | None => -1i64,
                        Some(s) => resolve(s, normals.len())? as i64,
                    };
                    let key = (pos, uv, nrm);
                    let id = *remap.entry(key).or_insert_with(|| {
                        out_vertices.push(positions[pos as usize]);
                        if uv >= 0 {
                            out_uvs.push(uvs[uv as usize]);
                        }
                        if nrm >= 0 {
                            out_normals.push(normals[nrm as usize]);
                        }
                        (out_vertices.len() - 1) as u32
                    });
                    corners.push(id);
                }
                if corners.len() < 3 {
                    return Err(err(format!("line {}: face with <3 corners", ln + 1)));
                }
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                        faces.push(tri);
                    }
                }
            }
            _ => {}
        }
    }

    let mut mesh = Mesh {
        vertices: out_vertices,
        faces,
        uvs: None,
        normals: None,
    };
    if !out_uvs.is_empty() {
        if out_uvs.len() != mesh.vertices.len() {
            return Err(err("faces mix textured and untextured corners".into()));
        }
        mesh.uvs = Some(out_uvs);
    }
    if !out_normals.is_empty() && out_normals.len() == mesh.vertices.len() {
        let renorm: Vec<Vector3<f64>> = out_normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 1e-12 {
                    n / len
                } else {
                    Vector3::new(0.0, 0.0, 1.0)
                }
            })
            .collect();
        mesh.normals = Some(renorm);
    }
    mesh.validate()?;
    Ok(mesh)
}
