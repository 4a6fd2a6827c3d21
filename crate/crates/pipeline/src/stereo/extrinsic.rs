//! Camera pose recovery from a world-frame point map: minimize the mean
//! squared reprojection error over a free 6-DOF extrinsic, then convert the
//! result to the nearest orbit pose.

use mesh4d_core::{
    nearest_rotation, project_point, rotation_from_axis_angle, CameraIntrinsics, CameraPose,
    PointCloud,
};
use nalgebra::{Matrix3, Point2, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrinsicParams {
    pub iterations: usize,
    /// Orbit-space polish steps after decomposition.
    pub polish_iterations: usize,
    /// Lookat clamp range used when decomposing to an orbit pose.
    pub lookat_range: [f64; 2],
}

impl Default for ExtrinsicParams {
    fn default() -> Self {
        ExtrinsicParams {
            iterations: 500,
            polish_iterations: 100,
            lookat_range: [-1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtrinsicFit {
    pub pose: CameraPose,
    /// Root-mean-square reprojection error in pixels of the returned pose.
    pub rmse_px: f64,
    pub initial_rmse_px: f64,
}

struct Extrinsic {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Extrinsic {
    fn from_pose(pose: &CameraPose) -> Self {
        let v = pose.view_matrix();
        Extrinsic {
            rotation: v.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: Vector3::new(v[(0, 3)], v[(1, 3)], v[(2, 3)]),
        }
    }

    fn camera_position(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// World-space view direction (camera −Z axis).
    fn forward(&self) -> Vector3<f64> {
        -self.rotation.transpose() * Vector3::new(0.0, 0.0, 1.0)
    }
}

struct Projector {
    proj_x: f64,
    proj_y: f64,
    half_w: f64,
    half_h: f64,
}

impl Projector {
    fn new(intr: &CameraIntrinsics) -> Self {
        let f = 1.0 / (intr.vertical_fov / 2.0).tan();
        Projector {
            proj_x: f / intr.aspect(),
            proj_y: f,
            half_w: intr.width as f64 * 0.5,
            half_h: intr.height as f64 * 0.5,
        }
    }

    /// Pixel position of a camera-space point, None at or behind the eye.
    fn project_cam(&self, c: &Vector3<f64>) -> Option<Vector2<f64>> {
        let w = -c.z;
        if w < 1e-9 {
            return None;
        }
        Some(Vector2::new(
            (self.proj_x * c.x / w + 1.0) * self.half_w,
            (1.0 - self.proj_y * c.y / w) * self.half_h,
        ))
    }
}

/// Mean squared reprojection error (px²) of an extrinsic; points behind the
/// camera are charged a large constant so the optimizer steers away.
fn mse_extrinsic(
    ext: &Extrinsic,
    points: &[Point3<f64>],
    pixels: &[Point2<f64>],
    proj: &Projector,
) -> f64 {
    const BEHIND_PENALTY: f64 = 1e8;
    let mut total = 0.0;
    for (p, px) in points.iter().zip(pixels) {
        let cam = ext.rotation * p.coords + ext.translation;
        match proj.project_cam(&cam) {
            Some(s) => {
                let dx = s.x - px.x;
                let dy = s.y - px.y;
                total += dx * dx + dy * dy;
            }
            None => total += BEHIND_PENALTY,
        }
    }
    total / points.len() as f64
}

fn mse_pose(
    pose: &CameraPose,
    points: &[Point3<f64>],
    pixels: &[Point2<f64>],
    intr: &CameraIntrinsics,
) -> f64 {
    const BEHIND_PENALTY: f64 = 1e8;
    let vp = intr.projection_matrix() * pose.view_matrix();
    let mut total = 0.0;
    for (p, px) in points.iter().zip(pixels) {
        match project_point(&vp, intr, p) {
            Some((s, _)) => {
                total += (s - px).norm_squared();
            }
            None => total += BEHIND_PENALTY,
        }
    }
    total / points.len() as f64
}

/// Analytic gradient of `mse_extrinsic` w.r.t. (ω, t), correspondences are
/// the data so nothing is held fixed.
fn grad_extrinsic(
    ext: &Extrinsic,
    points: &[Point3<f64>],
    pixels: &[Point2<f64>],
    proj: &Projector,
) -> (Vector3<f64>, Vector3<f64>) {
    let mut g_rot = Vector3::zeros();
    let mut g_t = Vector3::zeros();
    let n = points.len() as f64;
    let a = proj.half_w * proj.proj_x;
    let b = proj.half_h * proj.proj_y;
    for (p, px) in points.iter().zip(pixels) {
        let rp = ext.rotation * p.coords;
        let cam = rp + ext.translation;
        let w = -cam.z;
        if w < 1e-9 {
            continue;
        }
        let s = proj.project_cam(&cam).unwrap();
        let r = Vector2::new(s.x - px.x, s.y - px.y);
        let dsx_dcam = Vector3::new(a / w, 0.0, a * cam.x / (w * w));
        let dsy_dcam = Vector3::new(0.0, -b / w, -b * cam.y / (w * w));
        let dmse_dcam = (dsx_dcam * r.x + dsy_dcam * r.y) * (2.0 / n);
        g_t += dmse_dcam;
        // left-increment rotation: dcam/dω_k = e_k × (R p), so the gradient
        // component is e_k · (R p × dmse/dcam)
        g_rot += rp.cross(&dmse_dcam);
    }
    (g_rot, g_t)
}

const FAN_YAWS: usize = 8;
const FAN_PITCHES: [f64; 3] = [-0.6, 0.0, 0.6];

/// Recover the orbit camera pose whose projection best explains a point map.
///
/// Requires ≥ 6 points with pixel coordinates. A fan of centroid-facing
/// orbit poses at the cloud-fitting distance seeds a free 6-DOF descent;
/// the optimum is decomposed back to an orbit pose (lookat = point on the
/// view ray nearest the origin, clamped) and polished in orbit space.
/// Divergence (final error above the initialization) is an error.
pub fn extrinsic_from_pointmap(
    pc_ref: &PointCloud,
    intr: &CameraIntrinsics,
    params: &ExtrinsicParams,
) -> Result<ExtrinsicFit> {
    let pixels = pc_ref.pixel_coords.as_ref().ok_or_else(|| {
        PipelineError::InvalidConfig("point map lacks pixel coordinates".into())
    })?;
    if pc_ref.points.len() < 6 {
        return Err(PipelineError::InvalidConfig(format!(
            "need at least 6 points, got {}",
            pc_ref.points.len()
        )));
    }
    intr.validate()?;
    let points = &pc_ref.points;
    let proj = Projector::new(intr);

    // Centroid-facing initialization at the distance that frames the cloud.
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p.coords;
    }
    centroid /= points.len() as f64;
    let spread = points
        .iter()
        .map(|p| (p.coords - centroid).norm())
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let radius = (spread * 1.2 / (intr.vertical_fov / 2.0).tan()).clamp(0.05, 80.0);
    let lookat = Point3::from(centroid);

    let mut init_pose = None;
    let mut init_mse = f64::INFINITY;
    for yi in 0..FAN_YAWS {
        let yaw = yi as f64 / FAN_YAWS as f64 * std::f64::consts::TAU;
        for &pitch in &FAN_PITCHES {
            let pose = CameraPose {
                yaw,
                pitch,
                radius,
                lookat,
            };
            let m = mse_pose(&pose, points, pixels, intr);
            if m < init_mse {
                init_mse = m;
                init_pose = Some(pose);
            }
        }
    }
    let init_pose = init_pose.expect("fan is non-empty");
    let initial_rmse = init_mse.sqrt();

    // Free 6-DOF descent from the best fan pose.
    let mut ext = Extrinsic::from_pose(&init_pose);
    let mut current = init_mse;
    let mut lr = 0.1 * spread;
    for _ in 0..params.iterations {
        let (g_rot, g_t) = grad_extrinsic(&ext, points, pixels, &proj);
        let v_rot = g_rot * spread;
        let norm = (v_rot.norm_squared() + g_t.norm_squared()).sqrt();
        if norm < 1e-18 {
            break;
        }
        let mut stepped = false;
        for _ in 0..10 {
            let cand = Extrinsic {
                rotation: nearest_rotation(
                    &(rotation_from_axis_angle(&(-(lr * spread / norm) * g_rot)) * ext.rotation),
                ),
                translation: ext.translation - (lr / norm) * g_t,
            };
            let m = mse_extrinsic(&cand, points, pixels, &proj);
            if m < current {
                ext = cand;
                current = m;
                lr = (lr * 1.3).min(spread);
                stepped = true;
                break;
            }
            lr *= 0.5;
        }
        if !stepped && lr < 1e-14 * spread {
            break;
        }
    }

    // Decompose to the nearest orbit pose: lookat is the point on the view
    // ray closest to the world origin, clamped to the sampling range.
    let cam_pos = ext.camera_position();
    let fwd = ext.forward().normalize();
    let mut lambda = -cam_pos.coords.dot(&fwd);
    if lambda <= intr.near {
        lambda = spread.max(intr.near * 2.0);
    }
    let look_raw = cam_pos + lambda * fwd;
    let look = Point3::new(
        look_raw.x.clamp(params.lookat_range[0], params.lookat_range[1]),
        look_raw.y.clamp(params.lookat_range[0], params.lookat_range[1]),
        look_raw.z.clamp(params.lookat_range[0], params.lookat_range[1]),
    );
    let offset = cam_pos - look;
    let r = offset.norm().max(1e-6);
    let dir = offset / r;
    let pitch_limit = std::f64::consts::FRAC_PI_2 - 1e-6;
    let mut pose = CameraPose {
        yaw: dir.z.atan2(dir.x).rem_euclid(std::f64::consts::TAU),
        pitch: dir.y.clamp(-1.0, 1.0).asin().clamp(-pitch_limit, pitch_limit),
        radius: r,
        lookat: look,
    };
    let mut pose_mse = mse_pose(&pose, points, pixels, intr);

    // Orbit-space polish by central differences, monotone by construction.
    let eps = [1e-4, 1e-4, 1e-4 * r, 1e-4 * r, 1e-4 * r, 1e-4 * r];
    let get = |pose: &CameraPose, k: usize| match k {
        0 => pose.yaw,
        1 => pose.pitch,
        2 => pose.radius,
        3 => pose.lookat.x,
        4 => pose.lookat.y,
        _ => pose.lookat.z,
    };
    let set = |pose: &mut CameraPose, k: usize, v: f64| match k {
        0 => pose.yaw = v,
        1 => pose.pitch = v.clamp(-pitch_limit, pitch_limit),
        2 => pose.radius = v.max(1e-6),
        3 => pose.lookat.x = v,
        4 => pose.lookat.y = v,
        _ => pose.lookat.z = v,
    };
    let mut plr = 1e-2 * r;
    for _ in 0..params.polish_iterations {
        let mut grad = [0.0f64; 6];
        for k in 0..6 {
            let mut plus = pose;
            set(&mut plus, k, get(&pose, k) + eps[k]);
            let mut minus = pose;
            set(&mut minus, k, get(&pose, k) - eps[k]);
            grad[k] = (mse_pose(&plus, points, pixels, intr)
                - mse_pose(&minus, points, pixels, intr))
                / (2.0 * eps[k]);
        }
        let scale = [1.0, 1.0, r, r, r, r];
        let mut norm = 0.0;
        for k in 0..6 {
            let g = grad[k] * scale[k];
            norm += g * g;
        }
        let norm = norm.sqrt();
        if norm < 1e-18 {
            break;
        }
        let mut cand = pose;
        for k in 0..6 {
            // normalized-gradient step in coordinates scaled by `scale`
            set(
                &mut cand,
                k,
                get(&pose, k) - plr * (grad[k] * scale[k] / norm) * scale[k],
            );
        }
        let m = mse_pose(&cand, points, pixels, intr);
        if m < pose_mse {
            pose = cand;
            pose_mse = m;
            plr = (plr * 1.2).min(0.1 * r);
        } else {
            plr *= 0.5;
            if plr < 1e-14 * r {
                break;
            }
        }
    }

    if pose_mse > init_mse + 1e-12 {
        return Err(PipelineError::Divergence(format!(
            "extrinsic fit worsened: init RMSE {:.4} px, final {:.4} px over {} points",
            initial_rmse,
            pose_mse.sqrt(),
            points.len()
        )));
    }
    pose.validate()
        .map_err(|e| PipelineError::Divergence(format!("decomposed pose invalid: {e}")))?;
    Ok(ExtrinsicFit {
        pose,
        rmse_px: pose_mse.sqrt(),
        initial_rmse_px: initial_rmse,
    })
}
