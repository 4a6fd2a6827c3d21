use crate::error::{GeometryError, Result};
use crate::kdtree::KdTree3;
use crate::pointcloud::PointCloud;

/// Symmetric squared Chamfer distance:
/// mean over a∈A of min_b ‖a−b‖² plus mean over b∈B of min_a ‖a−b‖².
///
/// Means (not sums) per direction keep the value stable across cloud sizes.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyPointCloud);
    }
    let tree_a = KdTree3::build(&a.points);
    let tree_b = KdTree3::build(&b.points);
    Ok(mean_nearest_sq(&a.points, &tree_b) + mean_nearest_sq(&b.points, &tree_a))
}

pub(crate) fn mean_nearest_sq(points: &[nalgebra::Point3<f64>], target: &KdTree3) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|p| target.nearest(p).expect("non-empty tree").1)
        .sum();
    sum / points.len() as f64
}
