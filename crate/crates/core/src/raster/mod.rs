//! Deterministic software rasterizer.
//!
//! Scanline rasterization with a strict top-left fill rule; identical inputs
//! yield bit-identical buffers. Back-face culling is disabled throughout.
//! Pixel centers sit at (i+0.5, j+0.5) with y growing downward; the
//! antialiased silhouette path supersamples 2×2 per pixel.

mod softsil;
mod texture;

pub use softsil::{soft_silhouette, soft_silhouette_l1_grad, SoftSilhouette, SOFT_BAND_PX};
pub use texture::TextureAtlas;

use nalgebra::{Matrix4, Point2, Point3, Vector3, Vector4};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{GeometryError, Result};
use crate::mesh::Mesh;
use crate::pointcloud::PointCloud;

#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteMask {
    pub width: usize,
    pub height: usize,
    /// Row-major coverage in [0,1].
    pub data: Vec<f32>,
}

impl SilhouetteMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        SilhouetteMask {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn area(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct GeometryBuffer {
    pub width: usize,
    pub height: usize,
    /// World-space position per pixel; meaningful only where `valid`.
    pub positions: Vec<Point3<f64>>,
    /// Eye-space depth per pixel, in (near, far) where `valid`.
    pub depths: Vec<f64>,
    pub valid: Vec<bool>,
}

impl GeometryBuffer {
    pub fn empty(width: usize, height: usize) -> Self {
        GeometryBuffer {
            width,
            height,
            positions: vec![Point3::origin(); width * height],
            depths: vec![f64::INFINITY; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Valid pixels as a point cloud carrying their pixel centers.
    pub fn to_point_cloud(&self) -> PointCloud {
        let mut points = Vec::new();
        let mut pixels = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                if self.valid[i] {
                    points.push(self.positions[i]);
                    pixels.push(Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                }
            }
        }
        PointCloud {
            points,
            pixel_coords: Some(pixels),
        }
    }

    pub fn coverage_mask(&self) -> SilhouetteMask {
        SilhouetteMask {
            width: self.width,
            height: self.height,
            data: self.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// RGBA image in linear [0,1]; alpha 0 marks background.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 4]>,
}

impl ColorImage {
    pub fn transparent(width: usize, height: usize) -> Self {
        ColorImage {
            width,
            height,
            data: vec![[0.0; 4]; width * height],
        }
    }

    pub fn alpha_mask(&self) -> SilhouetteMask {
        SilhouetteMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|px| px[3]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskStats {
    pub mse: f64,
    pub iou: f64,
    pub area_diff: f64,
}

/// Per-pixel discrepancy metrics between two equally sized masks.
///
/// `iou` uses min/max as soft intersection/union with the empty/empty case
/// defined as 1; `area_diff` is |Σa − Σb| normalized by pixel count.
pub fn mask_discrepancy(a: &SilhouetteMask, b: &SilhouetteMask) -> Result<MaskStats> {
    if a.width != b.width || a.height != b.height {
        return Err(GeometryError::DimensionMismatch(format!(
            "mask {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut se = 0.0f64;
    let mut inter = 0.0f64;
    let mut union = 0.0f64;
    let mut sum_a = 0.0f64;
    let mut sum_b = 0.0f64;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let (x, y) = (x as f64, y as f64);
        let d = x - y;
        se += d * d;
        inter += x.min(y);
        union += x.max(y);
        sum_a += x;
        sum_b += y;
    }
    let n = (a.width * a.height) as f64;
    Ok(MaskStats {
        mse: se / n,
        iou: if union > 0.0 { inter / union } else { 1.0 },
        area_diff: (sum_a - sum_b).abs() / n,
    })
}

// ---------------------------------------------------------------------------
// triangle setup
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct ClipVertex {
    cam: Vector3<f64>,
    world: Point3<f64>,
    uv: Point2<f64>,
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    /// Eye-space depth (positive, equals clip w).
    w: f64,
    world: Point3<f64>,
    uv: Point2<f64>,
}

struct ScreenTriangle {
    v: [ScreenVertex; 3],
    face: u32,
}

fn lerp_clip(a: &ClipVertex, b: &ClipVertex, t: f64) -> ClipVertex {
    ClipVertex {
        cam: a.cam + (b.cam - a.cam) * t,
        world: a.world + (b.world - a.world) * t,
        uv: a.uv + (b.uv - a.uv) * t,
    }
}

/// Clip a camera-space triangle against z ≤ −near (Sutherland–Hodgman).
fn clip_near(tri: [ClipVertex; 3], near: f64, out: &mut Vec<ClipVertex>) {
    out.clear();
    for i in 0..3 {
        let cur = tri[i];
        let next = tri[(i + 1) % 3];
        let fc = -cur.cam.z - near;
        let fn_ = -next.cam.z - near;
        if fc >= 0.0 {
            out.push(cur);
        }
        if (fc >= 0.0) != (fn_ >= 0.0) {
            let t = fc / (fc - fn_);
            out.push(lerp_clip(&cur, &next, t));
        }
    }
}

struct RasterSetup {
    view: Matrix4<f64>,
    proj_x: f64,
    proj_y: f64,
    width: usize,
    height: usize,
    near: f64,
    far: f64,
}

impl RasterSetup {
    fn new(pose: &CameraPose, intr: &CameraIntrinsics) -> Result<Self> {
        pose.validate()?;
        intr.validate()?;
        let f = 1.0 / (intr.vertical_fov / 2.0).tan();
        Ok(RasterSetup {
            view: pose.view_matrix(),
            proj_x: f / intr.aspect(),
            proj_y: f,
            width: intr.width,
            height: intr.height,
            near: intr.near,
            far: intr.far,
        })
    }

    fn to_screen(&self, v: &ClipVertex) -> ScreenVertex {
        let w = -v.cam.z;
        let ndc_x = self.proj_x * v.cam.x / w;
        let ndc_y = self.proj_y * v.cam.y / w;
        ScreenVertex {
            x: (ndc_x + 1.0) * 0.5 * self.width as f64,
            y: (1.0 - ndc_y) * 0.5 * self.height as f64,
            w,
            world: v.world,
            uv: v.uv,
        }
    }

    /// View-transform, near-clip and project every face of `mesh`.
    fn screen_triangles(&self, mesh: &Mesh) -> Vec<ScreenTriangle> {
        let cam: Vec<Vector3<f64>> = mesh
            .vertices
            .iter()
            .map(|p| {
                let h = self.view * Vector4::new(p.x, p.y, p.z, 1.0);
                Vector3::new(h.x, h.y, h.z)
            })
            .collect();
        let zero_uv = Point2::new(0.0, 0.0);
        let uv = |i: u32| -> Point2<f64> {
            match &mesh.uvs {
                Some(uvs) => uvs[i as usize],
                None => zero_uv,
            }
        };
        let mut tris = Vec::with_capacity(mesh.faces.len());
        let mut poly = Vec::with_capacity(7);
        for (fi, f) in mesh.faces.iter().enumerate() {
            let cv = |k: usize| ClipVertex {
                cam: cam[f[k] as usize],
                world: mesh.vertices[f[k] as usize],
                uv: uv(f[k]),
            };
            let tri = [cv(0), cv(1), cv(2)];
            let all_front = tri.iter().all(|v| -v.cam.z >= self.near);
            if all_front {
                tris.push(ScreenTriangle {
                    v: [
                        self.to_screen(&tri[0]),
                        self.to_screen(&tri[1]),
                        self.to_screen(&tri[2]),
                    ],
                    face: fi as u32,
                });
            } else {
                clip_near(tri, self.near, &mut poly);
                if poly.len() < 3 {
                    continue;
                }
                for k in 1..poly.len() - 1 {
                    tris.push(ScreenTriangle {
                        v: [
                            self.to_screen(&poly[0]),
                            self.to_screen(&poly[k]),
                            self.to_screen(&poly[k + 1]),
                        ],
                        face: fi as u32,
                    });
                }
            }
        }
        tris
    }
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top-left fill rule for y-down screen coordinates and positively oriented
/// (screen-clockwise) triangles: a boundary sample belongs to the triangle if
/// the edge is a top edge (horizontal, pointing right) or a left edge
/// (pointing up).
#[inline]
fn is_top_left(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    if ay == by {
        bx > ax
    } else {
        by < ay
    }
}

struct PreparedTriangle {
    v: [ScreenVertex; 3],
    area2: f64,
    bias: [f64; 3],
    face: u32,
    min_x: usize,
    max_x: usize,
    min_y: usize,
    max_y: usize,
}

fn prepare(tri: &ScreenTriangle, width: usize, height: usize) -> Option<PreparedTriangle> {
    let mut v = tri.v;
    let mut area2 = edge(v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y);
    if area2 == 0.0 || !area2.is_finite() {
        return None;
    }
    if area2 < 0.0 {
        v.swap(1, 2);
        area2 = -area2;
    }
    let xs = [v[0].x, v[1].x, v[2].x];
    let ys = [v[0].y, v[1].y, v[2].y];
    let fmin = |a: &[f64; 3]| a.iter().cloned().fold(f64::INFINITY, f64::min);
    let fmax = |a: &[f64; 3]| a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_x = fmin(&xs).floor().max(0.0) as usize;
    let max_x = (fmax(&xs).ceil() as isize).min(width as isize) as usize;
    let min_y = fmin(&ys).floor().max(0.0) as usize;
    let max_y = (fmax(&ys).ceil() as isize).min(height as isize) as usize;
    if min_x >= max_x || min_y >= max_y {
        return None;
    }
    // Accept a sample when e > 0, or e == 0 on a top-left edge. Encoding the
    // strict case as e >= MIN_POSITIVE keeps the inner loop branch-free.
    let strict = f64::MIN_POSITIVE;
    let bias = [
        if is_top_left(v[1].x, v[1].y, v[2].x, v[2].y) { 0.0 } else { strict },
        if is_top_left(v[2].x, v[2].y, v[0].x, v[0].y) { 0.0 } else { strict },
        if is_top_left(v[0].x, v[0].y, v[1].x, v[1].y) { 0.0 } else { strict },
    ];
    Some(PreparedTriangle {
        v,
        area2,
        bias,
        face: tri.face,
        min_x,
        max_x,
        min_y,
        max_y,
    })
}

impl PreparedTriangle {
    /// Barycentric coordinates of a sample point, or None when outside.
    #[inline]
    fn barycentric(&self, px: f64, py: f64) -> Option<[f64; 3]> {
        let e0 = edge(self.v[1].x, self.v[1].y, self.v[2].x, self.v[2].y, px, py);
        let e1 = edge(self.v[2].x, self.v[2].y, self.v[0].x, self.v[0].y, px, py);
        let e2 = edge(self.v[0].x, self.v[0].y, self.v[1].x, self.v[1].y, px, py);
        if e0 >= self.bias[0] && e1 >= self.bias[1] && e2 >= self.bias[2] {
            Some([e0 / self.area2, e1 / self.area2, e2 / self.area2])
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// public render entry points
// ---------------------------------------------------------------------------

/// Binary object-coverage mask; empty meshes produce an all-zero mask.
pub fn render_silhouette(
    mesh: &Mesh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<SilhouetteMask> {
    let setup = RasterSetup::new(pose, intr)?;
    let mut mask = SilhouetteMask::zeros(intr.width, intr.height);
    if mesh.is_empty() {
        return Ok(mask);
    }
    for tri in setup.screen_triangles(mesh) {
        let Some(p) = prepare(&tri, intr.width, intr.height) else {
            continue;
        };
        for y in p.min_y..p.max_y {
            let py = y as f64 + 0.5;
            let row = y * intr.width;
            for x in p.min_x..p.max_x {
                if mask.data[row + x] == 1.0 {
                    continue;
                }
                if p.barycentric(x as f64 + 0.5, py).is_some() {
                    mask.data[row + x] = 1.0;
                }
            }
        }
    }
    Ok(mask)
}

/// Fractional-coverage silhouette from a 2×2 supersample (4× antialiasing).
pub fn render_silhouette_aa(
    mesh: &Mesh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<SilhouetteMask> {
    let hi = intr.with_resolution(intr.width * 2, intr.height * 2);
    let fine = render_silhouette(mesh, pose, &hi)?;
    let mut mask = SilhouetteMask::zeros(intr.width, intr.height);
    for y in 0..intr.height {
        for x in 0..intr.width {
            let mut acc = 0.0f32;
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                acc += fine.data[(2 * y + dy) * fine.width + 2 * x + dx];
            }
            mask.data[y * intr.width + x] = acc * 0.25;
        }
    }
    Ok(mask)
}

/// Nearest-surface world position and depth per covered pixel.
pub fn render_geometry_buffer(
    mesh: &Mesh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<GeometryBuffer> {
    let setup = RasterSetup::new(pose, intr)?;
    let mut buf = GeometryBuffer::empty(intr.width, intr.height);
    if mesh.is_empty() {
        return Ok(buf);
    }
    let mut owner = vec![u32::MAX; intr.width * intr.height];
    for tri in setup.screen_triangles(mesh) {
        let Some(p) = prepare(&tri, intr.width, intr.height) else {
            continue;
        };
        let invw = [1.0 / p.v[0].w, 1.0 / p.v[1].w, 1.0 / p.v[2].w];
        for y in p.min_y..p.max_y {
            let py = y as f64 + 0.5;
            for x in p.min_x..p.max_x {
                let Some(l) = p.barycentric(x as f64 + 0.5, py) else {
                    continue;
                };
                let denom = l[0] * invw[0] + l[1] * invw[1] + l[2] * invw[2];
                let depth = 1.0 / denom;
                if depth > setup.far {
                    continue;
                }
                let i = y * intr.width + x;
                let closer = depth < buf.depths[i]
                    || (depth == buf.depths[i] && p.face < owner[i]);
                if !closer {
                    continue;
                }
                let world = (p.v[0].world.coords * (l[0] * invw[0])
                    + p.v[1].world.coords * (l[1] * invw[1])
                    + p.v[2].world.coords * (l[2] * invw[2]))
                    * depth;
                buf.depths[i] = depth;
                buf.positions[i] = Point3::from(world);
                buf.valid[i] = true;
                owner[i] = p.face;
            }
        }
    }
    Ok(buf)
}

/// Albedo-only render: bilinear texture lookup at the interpolated UV,
/// transparent background, no lighting.
pub fn render_color(
    mesh: &Mesh,
    texture: &TextureAtlas,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<ColorImage> {
    if mesh.uvs.is_none() {
        return Err(GeometryError::MissingUvs);
    }
    texture.validate()?;
    let (uvbuf, valid) = render_uv_buffer(mesh, pose, intr)?;
    let mut img = ColorImage::transparent(intr.width, intr.height);
    for i in 0..uvbuf.len() {
        if valid[i] {
            let rgb = texture.sample_bilinear(uvbuf[i].x, uvbuf[i].y);
            img.data[i] = [rgb[0], rgb[1], rgb[2], 1.0];
        }
    }
    Ok(img)
}

/// Interpolated UV per covered pixel, depth-resolved. Used by the color
/// renderer and by texture baking.
pub fn render_uv_buffer(
    mesh: &Mesh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<(Vec<Point2<f64>>, Vec<bool>)> {
    if mesh.uvs.is_none() {
        return Err(GeometryError::MissingUvs);
    }
    let setup = RasterSetup::new(pose, intr)?;
    let mut uvbuf = vec![Point2::new(0.0, 0.0); intr.width * intr.height];
    let mut depths = vec![f64::INFINITY; intr.width * intr.height];
    let mut owner = vec![u32::MAX; intr.width * intr.height];
    let mut valid = vec![false; intr.width * intr.height];
    if mesh.is_empty() {
        return Ok((uvbuf, valid));
    }
    for tri in setup.screen_triangles(mesh) {
        let Some(p) = prepare(&tri, intr.width, intr.height) else {
            continue;
        };
        let invw = [1.0 / p.v[0].w, 1.0 / p.v[1].w, 1.0 / p.v[2].w];
        for y in p.min_y..p.max_y {
            let py = y as f64 + 0.5;
            for x in p.min_x..p.max_x {
                let Some(l) = p.barycentric(x as f64 + 0.5, py) else {
                    continue;
                };
                let denom = l[0] * invw[0] + l[1] * invw[1] + l[2] * invw[2];
                let depth = 1.0 / denom;
                if depth > setup.far {
                    continue;
                }
                let i = y * intr.width + x;
                let closer = depth < depths[i] || (depth == depths[i] && p.face < owner[i]);
                if !closer {
                    continue;
                }
                let uv = (p.v[0].uv.coords * (l[0] * invw[0])
                    + p.v[1].uv.coords * (l[1] * invw[1])
                    + p.v[2].uv.coords * (l[2] * invw[2]))
                    * depth;
                uvbuf[i] = Point2::from(uv);
                depths[i] = depth;
                owner[i] = p.face;
                valid[i] = true;
            }
        }
    }
    Ok((uvbuf, valid))
}
