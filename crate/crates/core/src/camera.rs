//! Orbit camera model.
//!
//! Conventions used by the whole workspace: world-up is +Y, yaw is measured
//! from +X toward +Z, pitch is positive above the horizon. The camera sits at
//! `lookat + radius·(cos pitch·cos yaw, sin pitch, cos pitch·sin yaw)` and
//! looks at `lookat`. Camera space is right-handed with the view direction
//! along −Z; projection is a pinhole perspective with clip w equal to the
//! positive eye-space depth.

use nalgebra::{Matrix4, Point2, Point3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::mesh::Mesh;

pub const MIN_PITCH_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Radians, measured from +X toward +Z.
    pub yaw: f64,
    /// Radians, strictly inside (−π/2, π/2).
    pub pitch: f64,
    /// Distance from `lookat`, > 0.
    pub radius: f64,
    pub lookat: Point3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Vertical field of view in radians, in (0, π).
    pub vertical_fov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl CameraPose {
    pub fn new(yaw: f64, pitch: f64, radius: f64, lookat: Point3<f64>) -> Result<Self> {
        let pose = CameraPose {
            yaw,
            pitch,
            radius,
            lookat,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(GeometryError::InvalidPose(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if !self.pitch.is_finite()
            || self.pitch.abs() >= std::f64::consts::FRAC_PI_2 - MIN_PITCH_MARGIN
        {
            return Err(GeometryError::InvalidPose(format!(
                "pitch must lie strictly inside (-π/2, π/2), got {}",
                self.pitch
            )));
        }
        if !self.yaw.is_finite() || !self.lookat.coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite pose field".into()));
        }
        Ok(())
    }

    /// Unit vector from `lookat` toward the camera.
    pub fn orbit_direction(&self) -> Vector3<f64> {
        Vector3::new(
            self.pitch.cos() * self.yaw.cos(),
            self.pitch.sin(),
            self.pitch.cos() * self.yaw.sin(),
        )
    }

    pub fn position(&self) -> Point3<f64> {
        self.lookat + self.radius * self.orbit_direction()
    }

    /// World → camera rigid transform.
    pub fn view_matrix(&self) -> Matrix4<f64> {
        let eye = self.position();
        let forward = (self.lookat - eye).normalize();
        let world_up = Vector3::new(0.0, 1.0, 0.0);
        let right = forward.cross(&world_up).normalize();
        let up = right.cross(&forward);
        let mut m = Matrix4::identity();
        for k in 0..3 {
            m[(0, k)] = right[k];
            m[(1, k)] = up[k];
            m[(2, k)] = -forward[k];
        }
        m[(0, 3)] = -right.dot(&eye.coords);
        m[(1, 3)] = -up.dot(&eye.coords);
        m[(2, 3)] = forward.dot(&eye.coords);
        m
    }
}

impl CameraIntrinsics {
    pub fn new(vertical_fov: f64, width: usize, height: usize, near: f64, far: f64) -> Result<Self> {
        let intr = CameraIntrinsics {
            vertical_fov,
            width,
            height,
            near,
            far,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// FOV 40°, 256×256, near 0.01, far 100.
    pub fn default_256() -> Self {
        CameraIntrinsics {
            vertical_fov: 40f64.to_radians(),
            width: 256,
            height: 256,
            near: 0.01,
            far: 100.0,
        }
    }

    pub fn with_resolution(&self, width: usize, height: usize) -> Self {
        CameraIntrinsics {
            width,
            height,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "vertical fov must be in (0, π), got {}",
                self.vertical_fov
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("zero resolution".into()));
        }
        if !(self.near > 0.0) || !(self.far > self.near) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "require 0 < near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        Ok(())
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    pub fn projection_matrix(&self) -> Matrix4<f64> {
        let f = 1.0 / (self.vertical_fov / 2.0).tan();
        let (n, fr) = (self.near, self.far);
        let mut m = Matrix4::zeros();
        m[(0, 0)] = f / self.aspect();
        m[(1, 1)] = f;
        m[(2, 2)] = (fr + n) / (n - fr);
        m[(2, 3)] = 2.0 * fr * n / (n - fr);
        m[(3, 2)] = -1.0;
        m
    }
}

/// View and projection matrices for a validated pose/intrinsics pair.
pub fn pose_to_matrices(
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
    pose.validate()?;
    intr.validate()?;
    Ok((pose.view_matrix(), intr.projection_matrix()))
}

/// Pixel-space projection of a world point: (pixel, eye-space depth).
/// Returns `None` for points at or behind the eye plane.
pub fn project_point(
    view_proj: &Matrix4<f64>,
    intr: &CameraIntrinsics,
    p: &Point3<f64>,
) -> Option<(Point2<f64>, f64)> {
    let h = view_proj * Vector4::new(p.x, p.y, p.z, 1.0);
    if h.w <= 1e-12 {
        return None;
    }
    let ndc_x = h.x / h.w;
    let ndc_y = h.y / h.w;
    let px = (ndc_x + 1.0) * 0.5 * intr.width as f64;
    let py = (1.0 - ndc_y) * 0.5 * intr.height as f64;
    Some((Point2::new(px, py), h.w))
}

/// Inverse of `project_point` given the eye-space depth.
pub fn unproject_pixel(
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    pixel: &Point2<f64>,
    depth: f64,
) -> Point3<f64> {
    let ndc_x = pixel.x / intr.width as f64 * 2.0 - 1.0;
    let ndc_y = 1.0 - pixel.y / intr.height as f64 * 2.0;
    let f = 1.0 / (intr.vertical_fov / 2.0).tan();
    // camera space: x right, y up, looking down -Z; depth = -z
    let x = ndc_x * depth * intr.aspect() / f;
    let y = ndc_y * depth / f;
    let cam = Vector4::new(x, y, -depth, 1.0);
    let world = pose
        .view_matrix()
        .try_inverse()
        .expect("view matrix is rigid, always invertible")
        * cam;
    Point3::new(world.x, world.y, world.z)
}

/// Transform `mesh` by `view(canonical)⁻¹ · view(pose)` so that rendering the
/// result from `canonical` matches rendering the input from `pose`.
pub fn repose_mesh(mesh: &Mesh, pose: &CameraPose, canonical: &CameraPose) -> Result<Mesh> {
    pose.validate()?;
    canonical.validate()?;
    let m = canonical
        .view_matrix()
        .try_inverse()
        .expect("rigid view matrix")
        * pose.view_matrix();
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        let h = m * Vector4::new(v.x, v.y, v.z, 1.0);
        *v = Point3::new(h.x, h.y, h.z);
    }
    if let Some(normals) = &mut out.normals {
        let rot = m.fixed_view::<3, 3>(0, 0).into_owned();
        for n in normals.iter_mut() {
            *n = rot * *n;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn orbit_construction_places_camera_on_x_axis() {
        let pose = CameraPose::new(0.0, 0.0, 2.0, Point3::origin()).unwrap();
        assert_relative_eq!(pose.position(), Point3::new(2.0, 0.0, 0.0), epsilon = 1e-15);
        let view = pose.view_matrix();
        let eye_h = view * Vector4::new(2.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(eye_h, Vector4::new(0.0, 0.0, 0.0, 1.0), epsilon = 1e-12);
        // lookat is straight ahead at distance radius
        let look_h = view * Vector4::new(0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(look_h, Vector4::new(0.0, 0.0, -2.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn near_pole_pitch_stays_finite() {
        let eps = 1e-3;
        let pose = CameraPose::new(
            0.3,
            std::f64::consts::FRAC_PI_2 - eps,
            1.5,
            Point3::origin(),
        )
        .unwrap();
        let p = pose.position();
        assert!(p.coords.iter().all(|c| c.is_finite()));
        assert_relative_eq!(p.y, 1.5 * (std::f64::consts::FRAC_PI_2 - eps).sin(), epsilon = 1e-12);
        let (v, pr) = pose_to_matrices(&pose, &CameraIntrinsics::default_256()).unwrap();
        assert!(v.iter().all(|c| c.is_finite()));
        assert!(pr.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn view_rotation_block_is_orthonormal() {
        let pose = CameraPose::new(1.2, -0.4, 3.0, Point3::new(0.3, -0.2, 0.8)).unwrap();
        let v = pose.view_matrix();
        let r = v.fixed_view::<3, 3>(0, 0).into_owned();
        let dev = (r.transpose() * r - nalgebra::Matrix3::identity()).norm();
        assert!(dev < 1e-9, "|RᵀR - I| = {dev}");
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn invalid_pose_rejected() {
        assert!(CameraPose::new(0.0, 0.0, -1.0, Point3::origin()).is_err());
        assert!(CameraPose::new(0.0, std::f64::consts::FRAC_PI_2, 1.0, Point3::origin()).is_err());
        assert!(CameraIntrinsics::new(0.0, 64, 64, 0.01, 10.0).is_err());
        assert!(CameraIntrinsics::new(0.7, 64, 64, 5.0, 1.0).is_err());
    }

    #[test]
    fn project_unproject_round_trip() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pose = CameraPose::new(0.8, 0.25, 2.5, Point3::new(0.1, 0.0, -0.1)).unwrap();
        let intr = CameraIntrinsics::default_256();
        let vp = intr.projection_matrix() * pose.view_matrix();
        let mut checked = 0;
        while checked < 100 {
            let p = Point3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            let Some((px, depth)) = project_point(&vp, &intr, &p) else {
                continue;
            };
            if px.x < 0.0 || px.x >= 256.0 || px.y < 0.0 || px.y >= 256.0 {
                continue;
            }
            let back = unproject_pixel(&pose, &intr, &px, depth);
            assert_relative_eq!(back, p, epsilon = 1e-6);
            checked += 1;
        }
    }

    #[test]
    fn repose_identity_when_poses_match() {
        let mesh = Mesh::new(
            vec![
                Point3::new(0.1, 0.2, 0.3),
                Point3::new(-0.4, 0.0, 0.2),
                Point3::new(0.0, 0.5, -0.3),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let pose = CameraPose::new(0.7, 0.2, 2.0, Point3::origin()).unwrap();
        let out = repose_mesh(&mesh, &pose, &pose).unwrap();
        for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn repose_round_trip_restores_mesh() {
        let mesh = Mesh::new(
            vec![
                Point3::new(0.1, 0.2, 0.3),
                Point3::new(-0.4, 0.0, 0.2),
                Point3::new(0.0, 0.5, -0.3),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let a = CameraPose::new(0.7, 0.2, 2.0, Point3::origin()).unwrap();
        let b = CameraPose::new(-1.1, -0.3, 3.5, Point3::new(0.2, 0.1, 0.0)).unwrap();
        let out = repose_mesh(&repose_mesh(&mesh, &a, &b).unwrap(), &b, &a).unwrap();
        for (x, y) in out.vertices.iter().zip(&mesh.vertices) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn repose_yaw_offset_rotates_mesh_about_up() {
        // A yaw-offset pose reposes into a rotation of the mesh about world-up
        // around the lookat point.
        let mesh = Mesh::new(
            vec![
                Point3::new(0.4, 0.0, 0.0),
                Point3::new(0.0, 0.3, 0.0),
                Point3::new(0.0, 0.0, 0.2),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let canonical = CameraPose::new(0.0, 0.0, 2.0, Point3::origin()).unwrap();
        let pose = CameraPose::new(std::f64::consts::FRAC_PI_2, 0.0, 2.0, Point3::origin()).unwrap();
        let out = repose_mesh(&mesh, &pose, &canonical).unwrap();
        // Camera moved +90° of yaw around the object ⇔ the object rotated by
        // −90° in the yaw sense (+X toward +Z), which is +90° under the
        // right-hand rule about +Y.
        let rot = nalgebra::Rotation3::from_axis_angle(
            &Vector3::y_axis(),
            std::f64::consts::FRAC_PI_2,
        );
        for (v, orig) in out.vertices.iter().zip(&mesh.vertices) {
            let expected = rot * orig;
            assert_relative_eq!(v, &expected, epsilon = 1e-9);
        }
    }
}
