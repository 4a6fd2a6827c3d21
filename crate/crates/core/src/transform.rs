use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::mesh::Mesh;
use crate::pointcloud::PointCloud;

/// Rotation + uniform scale + translation: p ↦ scale · R · p + translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, scale: f64, translation: Vector3<f64>) -> Result<Self> {
        let t = SimilarityTransform {
            rotation,
            scale,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(GeometryError::InvalidTransform(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        let rtr = self.rotation.transpose() * self.rotation;
        let dev = (rtr - Matrix3::identity()).norm();
        if dev > 1e-9 {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation is not orthonormal (|RᵀR - I| = {dev:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(())
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &Mesh) -> Mesh {
        let mut out = mesh.clone();
        for v in &mut out.vertices {
            *v = self.apply_point(v);
        }
        if let Some(normals) = &mut out.normals {
            for n in normals.iter_mut() {
                *n = self.rotation * *n;
            }
        }
        out
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply_point(p)).collect(),
            pixel_coords: cloud.pixel_coords.clone(),
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        SimilarityTransform {
            rotation: rt,
            scale: 1.0 / self.scale,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            rotation: self.rotation * other.rotation,
            scale: self.scale * other.scale,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    /// Project the rotation block back onto SO(3) via SVD.
    pub fn reorthonormalize(&mut self) {
        self.rotation = nearest_rotation(&self.rotation);
    }

    /// Rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        let tr = self.rotation.trace();
        ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Closest rotation matrix (Frobenius) to an arbitrary 3×3 matrix.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).scale_mut(-1.0);
        r = u2 * vt;
    }
    r
}

/// Rodrigues' formula: rotation matrix from an axis-angle vector.
pub fn rotation_from_axis_angle(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    if theta < 1e-12 {
        return Matrix3::identity() + skew(w);
    }
    let axis = w / theta;
    let k = skew(&axis);
    Matrix3::identity() + theta.sin() * k + (1.0 - theta.cos()) * (k * k)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    #[test]
    fn identity_leaves_mesh_unchanged() {
        let m = Mesh::new(
            vec![
                Point3::new(0.3, -1.2, 4.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.5),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let out = SimilarityTransform::identity().apply_mesh(&m);
        assert_eq!(out.vertices, m.vertices);
        assert_eq!(out.faces, m.faces);
    }

    #[test]
    fn scale_two_doubles_cube_edge() {
        let cube: Vec<Point3<f64>> = (0..8)
            .map(|i| {
                Point3::new(
                    (i & 1) as f64,
                    ((i >> 1) & 1) as f64,
                    ((i >> 2) & 1) as f64,
                )
            })
            .collect();
        let t = SimilarityTransform::new(Matrix3::identity(), 2.0, Vector3::zeros()).unwrap();
        let out: Vec<_> = cube.iter().map(|p| t.apply_point(p)).collect();
        assert_relative_eq!((out[1] - out[0]).norm(), 2.0, epsilon = 1e-15);
        assert_relative_eq!((out[7] - out[0]).norm(), 2.0 * 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let t = SimilarityTransform::new(
            r.into_inner(),
            1.7,
            Vector3::new(0.5, -2.0, 3.0),
        )
        .unwrap();
        let inv = t.inverse();
        let p = Point3::new(0.2, 0.9, -1.4);
        let back = inv.apply_point(&t.apply_point(&p));
        assert_relative_eq!(back, p, epsilon = 1e-9);
        let composed = t.compose(&inv);
        assert_relative_eq!(composed.scale, 1.0, epsilon = 1e-12);
        assert_relative_eq!(composed.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert!(composed.translation.norm() < 1e-12);
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(SimilarityTransform::new(m, 1.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn axis_angle_matches_nalgebra() {
        let w = Vector3::new(0.2, -0.5, 0.9);
        let ours = rotation_from_axis_angle(&w);
        let theirs = Rotation3::new(w).into_inner();
        assert_relative_eq!(ours, theirs, epsilon = 1e-12);
    }
}
