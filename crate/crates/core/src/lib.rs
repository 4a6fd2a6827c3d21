//! Shared geometry foundation: meshes, orbit cameras, similarity transforms,
//! point clouds, Chamfer distance, and a deterministic software rasterizer.
//!
//! Axis conventions (used by every downstream crate): world-up is +Y and yaw
//! is measured from +X toward +Z. See [`camera`] for the full camera model.

pub mod camera;
pub mod chamfer;
pub mod error;
pub mod io;
pub mod kdtree;
pub mod mesh;
pub mod pointcloud;
pub mod raster;
pub mod transform;

pub use camera::{
    pose_to_matrices, project_point, repose_mesh, unproject_pixel, CameraIntrinsics, CameraPose,
};
pub use chamfer::chamfer_distance;
pub use error::{GeometryError, Result};
pub use kdtree::KdTree3;
pub use mesh::{Mesh, SurfaceSample};
pub use pointcloud::PointCloud;
pub use raster::{
    mask_discrepancy, render_color, render_geometry_buffer, render_silhouette,
    render_silhouette_aa, render_uv_buffer, soft_silhouette, soft_silhouette_l1_grad, ColorImage,
    GeometryBuffer, MaskStats, SilhouetteMask, SoftSilhouette, TextureAtlas, SOFT_BAND_PX,
};
pub use transform::{nearest_rotation, rotation_from_axis_angle, skew, SimilarityTransform};
