//! Smooth silhouette coverage with analytic vertex gradients.
//!
//! Per-pixel coverage is `1 − Π_t (1 − c_t)` where `c_t` falls off from 1 to
//! 0 across a band of ±`band` pixels around triangle `t`'s projected boundary
//! (quintic smootherstep of the signed 2D distance, so the coverage is C² in
//! the vertex positions). Away from boundaries this reproduces a hard
//! silhouette; the band makes image losses differentiable with respect to
//! mesh vertices. Visibility is irrelevant for silhouettes, so there is no
//! depth resolution here.

use nalgebra::{Matrix4, Point3, Vector2, Vector3, Vector4};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::raster::SilhouetteMask;

/// Default half-width of the soft boundary band, in pixels.
pub const SOFT_BAND_PX: f64 = 1.5;

/// Keeps 1−c_t bounded away from zero so the product rule stays finite.
const COVERAGE_CAP: f64 = 1.0 - 1e-7;

pub struct SoftSilhouette {
    pub width: usize,
    pub height: usize,
    /// Row-major coverage in [0,1).
    pub coverage: Vec<f64>,
}

impl SoftSilhouette {
    pub fn to_mask(&self) -> SilhouetteMask {
        SilhouetteMask {
            width: self.width,
            height: self.height,
            data: self.coverage.iter().map(|&c| c as f32).collect(),
        }
    }
}

struct Projected {
    screen: Vec<Vector2<f64>>,
    /// Eye-space depth per vertex; negative marks vertices behind the near plane.
    depth: Vec<f64>,
    view: Matrix4<f64>,
    proj_x: f64,
    proj_y: f64,
    half_w: f64,
    half_h: f64,
}

fn project(vertices: &[Point3<f64>], pose: &CameraPose, intr: &CameraIntrinsics) -> Result<Projected> {
    pose.validate()?;
    intr.validate()?;
    let view = pose.view_matrix();
    let f = 1.0 / (intr.vertical_fov / 2.0).tan();
    let proj_x = f / intr.aspect();
    let proj_y = f;
    let half_w = intr.width as f64 * 0.5;
    let half_h = intr.height as f64 * 0.5;
    let mut screen = Vec::with_capacity(vertices.len());
    let mut depth = Vec::with_capacity(vertices.len());
    for v in vertices {
        let c = view * Vector4::new(v.x, v.y, v.z, 1.0);
        let w = -c.z;
        if w < intr.near {
            screen.push(Vector2::zeros());
            depth.push(-1.0);
            continue;
        }
        screen.push(Vector2::new(
            (proj_x * c.x / w + 1.0) * half_w,
            (1.0 - proj_y * c.y / w) * half_h,
        ));
        depth.push(w);
    }
    Ok(Projected {
        screen,
        depth,
        view,
        proj_x,
        proj_y,
        half_w,
        half_h,
    })
}

/// Quintic smootherstep and its derivative on [0,1].
#[inline]
fn smootherstep(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0)
    } else {
        let s = x * x * x * (x * (x * 6.0 - 15.0) + 10.0);
        let ds = 30.0 * x * x * (x - 1.0) * (x - 1.0);
        (s, ds)
    }
}

/// Distance from `p` to segment a→b with gradients w.r.t. both endpoints.
#[inline]
fn segment_distance(
    p: Vector2<f64>,
    a: Vector2<f64>,
    b: Vector2<f64>,
) -> (f64, Vector2<f64>, Vector2<f64>) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 1e-24 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = a + ab * t;
    let diff = p - q;
    let dist = diff.norm();
    if dist < 1e-12 {
        return (dist, Vector2::zeros(), Vector2::zeros());
    }
    let n = diff / dist;
    (dist, -n * (1.0 - t), -n * t)
}

/// Signed distance of `p` to the triangle (negative inside) plus distance
/// gradients w.r.t. the three screen-space vertices.
#[inline]
fn triangle_signed_distance(
    p: Vector2<f64>,
    v: &[Vector2<f64>; 3],
) -> (f64, [Vector2<f64>; 3]) {
    let e = |a: Vector2<f64>, b: Vector2<f64>| (b - a).perp(&(p - a));
    let e0 = e(v[0], v[1]);
    let e1 = e(v[1], v[2]);
    let e2 = e(v[2], v[0]);
    let area2 = (v[1] - v[0]).perp(&(v[2] - v[0]));
    let inside = if area2 >= 0.0 {
        e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0
    } else {
        e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0
    };

    let mut grads = [Vector2::zeros(); 3];
    let segs = [(0usize, 1usize), (1, 2), (2, 0)];
    let mut best = f64::INFINITY;
    let mut best_pair = (0usize, 1usize);
    let mut best_ga = Vector2::zeros();
    let mut best_gb = Vector2::zeros();
    for &(ia, ib) in &segs {
        let (d, ga, gb) = segment_distance(p, v[ia], v[ib]);
        if d < best {
            best = d;
            best_pair = (ia, ib);
            best_ga = ga;
            best_gb = gb;
        }
    }
    let sign = if inside { -1.0 } else { 1.0 };
    grads[best_pair.0] = best_ga * sign;
    grads[best_pair.1] = best_gb * sign;
    (sign * best, grads)
}

/// Forward soft coverage.
pub fn soft_silhouette(
    mesh: &Mesh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    band: f64,
) -> Result<SoftSilhouette> {
    let proj = project(&mesh.vertices, pose, intr)?;
    let n = intr.width * intr.height;
    let mut prod = vec![1.0f64; n];
    for f in &mesh.faces {
        accumulate_triangle(&proj, intr, f, band, &mut prod);
    }
    let coverage = prod.iter().map(|&p| 1.0 - p).collect();
    Ok(SoftSilhouette {
        width: intr.width,
        height: intr.height,
        coverage,
    })
}

fn triangle_bbox(
    v: &[Vector2<f64>; 3],
    band: f64,
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    let pad = band + 0.5;
    let min_x = (v[0].x.min(v[1].x).min(v[2].x) - pad).floor().max(0.0) as usize;
    let min_y = (v[0].y.min(v[1].y).min(v[2].y) - pad).floor().max(0.0) as usize;
    let max_x = ((v[0].x.max(v[1].x).max(v[2].x) + pad).ceil() as isize).min(width as isize);
    let max_y = ((v[0].y.max(v[1].y).max(v[2].y) + pad).ceil() as isize).min(height as isize);
    if max_x <= min_x as isize || max_y <= min_y as isize {
        return None;
    }
    Some((min_x, max_x as usize, min_y, max_y as usize))
}

#[inline]
fn coverage_of_distance(d: f64, band: f64) -> (f64, f64) {
    let x = (d + band) / (2.0 * band);
    let (s, ds) = smootherstep(x);
    let c = COVERAGE_CAP * (1.0 - s);
    let dc_dd = -COVERAGE_CAP * ds / (2.0 * band);
    (c, dc_dd)
}

fn accumulate_triangle(
    proj: &Projected,
    intr: &CameraIntrinsics,
    face: &[u32; 3],
    band: f64,
    prod: &mut [f64],
) {
    let idx = [face[0] as usize, face[1] as usize, face[2] as usize];
    if idx.iter().any(|&i| proj.depth[i] < 0.0) {
        return;
    }
    let v = [proj.screen[idx[0]], proj.screen[idx[1]], proj.screen[idx[2]]];
    let Some((min_x, max_x, min_y, max_y)) = triangle_bbox(&v, band, intr.width, intr.height)
    else {
        return;
    };
    for y in min_y..max_y {
        let py = y as f64 + 0.5;
        for x in min_x..max_x {
            let p = Vector2::new(x as f64 + 0.5, py);
            let (d, _) = triangle_signed_distance(p, &v);
            if d >= band {
                continue;
            }
            let (c, _) = coverage_of_distance(d, band);
            prod[y * intr.width + x] *= 1.0 - c;
        }
    }
}

/// Mean-absolute-difference loss between the soft coverage and `target`,
/// with its gradient w.r.t. every mesh vertex.
pub fn soft_silhouette_l1_grad(
    mesh: &Mesh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    band: f64,
    target: &SilhouetteMask,
) -> Result<(f64, Vec<Vector3<f64>>)> {
    assert_eq!(target.width, intr.width);
    assert_eq!(target.height, intr.height);
    let proj = project(&mesh.vertices, pose, intr)?;
    let n_px = intr.width * intr.height;
    let mut prod = vec![1.0f64; n_px];
    for f in &mesh.faces {
        accumulate_triangle(&proj, intr, f, band, &mut prod);
    }

    let mut loss = 0.0f64;
    let mut dl_dcov = vec![0.0f64; n_px];
    let inv_n = 1.0 / n_px as f64;
    for i in 0..n_px {
        let cov = 1.0 - prod[i];
        let r = cov - target.data[i] as f64;
        loss += r.abs() * inv_n;
        dl_dcov[i] = if r > 0.0 {
            inv_n
        } else if r < 0.0 {
            -inv_n
        } else {
            0.0
        };
    }

    // Backward: dcov/dc_t = Π_{t'≠t}(1−c_{t'}) = prod / (1−c_t).
    let mut grad = vec![Vector3::zeros(); mesh.vertices.len()];
    let rot = proj.view.fixed_view::<3, 3>(0, 0).into_owned();
    for face in &mesh.faces {
        let idx = [face[0] as usize, face[1] as usize, face[2] as usize];
        if idx.iter().any(|&i| proj.depth[i] < 0.0) {
            continue;
        }
        let v = [proj.screen[idx[0]], proj.screen[idx[1]], proj.screen[idx[2]]];
        let Some((min_x, max_x, min_y, max_y)) =
            triangle_bbox(&v, band, intr.width, intr.height)
        else {
            continue;
        };
        let mut g_screen = [Vector2::zeros(); 3];
        let mut touched = false;
        for y in min_y..max_y {
            let py = y as f64 + 0.5;
            for x in min_x..max_x {
                let pi = y * intr.width + x;
                if dl_dcov[pi] == 0.0 {
                    continue;
                }
                let p = Vector2::new(x as f64 + 0.5, py);
                let (d, gd) = triangle_signed_distance(p, &v);
                if d >= band || d <= -band {
                    continue;
                }
                let (c, dc_dd) = coverage_of_distance(d, band);
                let others = prod[pi] / (1.0 - c);
                // cov = 1 − others·(1−c): dcov/dd = others·dc_dd
                let w = dl_dcov[pi] * others * dc_dd;
                if w == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    g_screen[k] += gd[k] * w;
                }
                touched = true;
            }
        }
        if !touched {
            continue;
        }
        for k in 0..3 {
            let vi = idx[k];
            grad[vi] += screen_jacobian_transpose_mul(&proj, vi, &rot, g_screen[k]);
        }
    }
    Ok((loss, grad))
}

/// Maps a screen-space gradient (dL/dsx, dL/dsy) at vertex `vi` back to a
/// world-space gradient through the projection chain.
fn screen_jacobian_transpose_mul(
    proj: &Projected,
    vi: usize,
    view_rot: &nalgebra::Matrix3<f64>,
    g: Vector2<f64>,
) -> Vector3<f64> {
    let w = proj.depth[vi];
    // Recover camera-space x,y from the stored screen position.
    let sx = proj.screen[vi].x;
    let sy = proj.screen[vi].y;
    let ndc_x = sx / proj.half_w - 1.0;
    let ndc_y = 1.0 - sy / proj.half_h;
    let cx = ndc_x * w / proj.proj_x;
    let cy = ndc_y * w / proj.proj_y;
    // d(sx)/d(cam) and d(sy)/d(cam); w = −cam.z.
    let a = proj.half_w * proj.proj_x;
    let b = proj.half_h * proj.proj_y;
    let dsx_dcam = Vector3::new(a / w, 0.0, a * cx / (w * w));
    let dsy_dcam = Vector3::new(0.0, -b / w, -b * cy / (w * w));
    let dcam = dsx_dcam * g.x + dsy_dcam * g.y;
    view_rot.transpose() * dcam
}
