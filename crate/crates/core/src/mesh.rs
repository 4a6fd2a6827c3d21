use nalgebra::{Point2, Point3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GeometryError, Result};

/// Indexed triangle mesh with optional per-vertex UVs and normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub uvs: Option<Vec<Point2<f64>>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

/// A point on a mesh surface, kept as (face, barycentric) so the position
/// can be re-evaluated after the vertices move.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub face: u32,
    pub bary: [f64; 3],
}

impl Mesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            faces,
            uvs: None,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_uvs(mut self, uvs: Vec<Point2<f64>>) -> Result<Self> {
        self.uvs = Some(uvs);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, f) in self.faces.iter().enumerate() {
            if f[0] >= n || f[1] >= n || f[2] >= n {
                return Err(GeometryError::InvalidMesh(format!(
                    "face {i} references vertex out of range (vertex count {n})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeometryError::InvalidMesh(format!(
                    "face {i} is degenerate: {f:?}"
                )));
            }
        }
        if let Some(uvs) = &self.uvs {
            if uvs.len() != self.vertices.len() {
                return Err(GeometryError::InvalidMesh(format!(
                    "uv count {} != vertex count {}",
                    uvs.len(),
                    self.vertices.len()
                )));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.vertices.len() {
                return Err(GeometryError::InvalidMesh(format!(
                    "normal count {} != vertex count {}",
                    normals.len(),
                    self.vertices.len()
                )));
            }
            for (i, nrm) in normals.iter().enumerate() {
                if (nrm.norm() - 1.0).abs() > 1e-6 {
                    return Err(GeometryError::InvalidMesh(format!(
                        "normal {i} is not unit length: |n| = {}",
                        nrm.norm()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    pub fn face_vertices(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_vertices(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn bbox(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        if self.vertices.is_empty() {
            return None;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        match self.bbox() {
            Some((lo, hi)) => (hi - lo).norm(),
            None => 0.0,
        }
    }

    /// Undirected edge list (a < b), sorted, deduplicated.
    pub fn edges(&self) -> Vec<[u32; 2]> {
        let mut edges = Vec::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let (a, b) = (f[i].min(f[j]), f[i].max(f[j]));
                edges.push([a, b]);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// One-ring vertex adjacency derived from the edge list.
    pub fn vertex_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for [a, b] in self.edges() {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        adj
    }

    /// Area-weighted per-vertex normals; isolated vertices get +Z.
    pub fn vertex_normals(&self) -> Mesh {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let a = self.vertices[f[0] as usize];
            let b = self.vertices[f[1] as usize];
            let c = self.vertices[f[2] as usize];
            // cross product length is twice the area, so this is area weighting
            let n = (b - a).cross(&(c - a));
            for &i in f {
                acc[i as usize] += n;
            }
        }
        let normals = acc
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
        let mut out = self.clone();
        out.normals = Some(normals);
        out
    }

    /// Draw `count` area-weighted surface samples, deterministic under `seed`.
    pub fn sample_surface(&self, count: usize, seed: u64) -> Vec<SurfaceSample> {
        if self.is_empty() || count == 0 {
            return Vec::new();
        }
        let mut cumulative = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for i in 0..self.faces.len() {
            total += self.face_area(i);
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * total;
                let face = cumulative.partition_point(|&c| c < u).min(self.faces.len() - 1);
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let s = r1.sqrt();
                SurfaceSample {
                    face: face as u32,
                    bary: [1.0 - s, s * (1.0 - r2), s * r2],
                }
            })
            .collect()
    }

    pub fn sample_position(&self, s: &SurfaceSample) -> Point3<f64> {
        let [a, b, c] = self.face_vertices(s.face as usize);
        Point3::from(a.coords * s.bary[0] + b.coords * s.bary[1] + c.coords * s.bary[2])
    }

    pub fn sample_positions(&self, samples: &[SurfaceSample]) -> Vec<Point3<f64>> {
        samples.iter().map(|s| self.sample_position(s)).collect()
    }

    /// True when both meshes have identical face lists (same triples, same order)
    /// and equal vertex counts.
    pub fn same_topology(&self, other: &Mesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }
}
