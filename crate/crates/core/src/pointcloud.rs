use nalgebra::{Point2, Point3};

use crate::error::{GeometryError, Result};

/// 3D samples with optional per-point source-pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub pixel_coords: Option<Vec<Point2<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        PointCloud {
            points,
            pixel_coords: None,
        }
    }

    pub fn with_pixels(points: Vec<Point3<f64>>, pixels: Vec<Point2<f64>>) -> Result<Self> {
        if points.len() != pixels.len() {
            return Err(GeometryError::DimensionMismatch(format!(
                "{} points vs {} pixel coords",
                points.len(),
                pixels.len()
            )));
        }
        Ok(PointCloud {
            points,
            pixel_coords: Some(pixels),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        if self.points.is_empty() {
            return None;
        }
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
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

    /// Keep the points at the given (sorted or unsorted) indices.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            pixel_coords: self
                .pixel_coords
                .as_ref()
                .map(|px| indices.iter().map(|&i| px[i]).collect()),
        }
    }
}
