//! Dense-stereo prior behind an interface.
//!
//! A real pipeline would run a pretrained stereo network over the reference
//! frame and a handful of rendered views; here the estimator is pluggable.
//! The synthetic implementation returns ground-truth geometry buffers pushed
//! through a hidden similarity transform with optional Gaussian noise and
//! outliers, which is exactly what the alignment stage has to undo.

mod align;
mod extrinsic;

pub use align::{align_to_world, AlignParams, AlignTrace};
pub use extrinsic::{extrinsic_from_pointmap, ExtrinsicFit, ExtrinsicParams};

use mesh4d_core::{
    render_geometry_buffer, CameraIntrinsics, CameraPose, ColorImage, Mesh, PointCloud,
    SimilarityTransform,
};
use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PipelineError, Result};

/// One input view for the estimator. The reference frame carries no pose
/// (recovering it is the whole point); rendered views carry the pose they
/// were rendered from.
pub enum StereoView<'a> {
    Reference { image: Option<&'a ColorImage> },
    Rendered {
        image: Option<&'a ColorImage>,
        pose: CameraPose,
    },
}

/// Per-view point clouds in one shared arbitrary coordinate frame, with
/// pixel coordinates populated.
#[derive(Debug, Clone)]
pub struct StereoEstimate {
    pub clouds: Vec<PointCloud>,
}

pub trait StereoEstimator: Sync {
    fn estimate_pointmaps(&self, views: &[StereoView]) -> Result<StereoEstimate>;
}

/// Test-harness estimator: ground-truth geometry buffers under a hidden
/// similarity transform, with Gaussian noise (σ as a fraction of the bbox
/// diagonal) and a fraction of outliers drawn uniformly in the bbox.
pub struct SyntheticStereo {
    pub mesh: Mesh,
    pub reference_pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
    pub noise_sigma_frac: f64,
    pub outlier_frac: f64,
    pub seed: u64,
    hidden: SimilarityTransform,
}

impl SyntheticStereo {
    pub fn new(
        mesh: Mesh,
        reference_pose: CameraPose,
        intrinsics: CameraIntrinsics,
        noise_sigma_frac: f64,
        outlier_frac: f64,
        seed: u64,
    ) -> Self {
        let hidden = random_similarity(seed ^ 0x9e37_79b9_7f4a_7c15);
        SyntheticStereo {
            mesh,
            reference_pose,
            intrinsics,
            noise_sigma_frac,
            outlier_frac,
            seed,
            hidden,
        }
    }

    pub fn noiseless(
        mesh: Mesh,
        reference_pose: CameraPose,
        intrinsics: CameraIntrinsics,
        seed: u64,
    ) -> Self {
        Self::new(mesh, reference_pose, intrinsics, 0.0, 0.0, seed)
    }

    /// The transform the alignment stage is supposed to recover (inverse).
    pub fn hidden_transform(&self) -> &SimilarityTransform {
        &self.hidden
    }
}

/// Deterministic random similarity: rotation up to π, scale in [0.5, 2],
/// translation within ±1.
pub fn random_similarity(seed: u64) -> SimilarityTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 {
            break v / n;
        }
    };
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let rotation = mesh4d_core::rotation_from_axis_angle(&(axis * angle));
    let scale = rng.random_range(0.5..2.0);
    let translation = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    SimilarityTransform {
        rotation,
        scale,
        translation,
    }
}

impl StereoEstimator for SyntheticStereo {
    fn estimate_pointmaps(&self, views: &[StereoView]) -> Result<StereoEstimate> {
        if views.len() < 2 {
            return Err(PipelineError::Stereo(format!(
                "need at least 2 images, got {}",
                views.len()
            )));
        }
        let mut clouds = Vec::with_capacity(views.len());
        for view in views {
            let pose = match view {
                StereoView::Reference { .. } => self.reference_pose,
                StereoView::Rendered { pose, .. } => *pose,
            };
            let buf = render_geometry_buffer(&self.mesh, &pose, &self.intrinsics)?;
            clouds.push(self.hidden.apply_cloud(&buf.to_point_cloud()));
        }
        // Perturb in the hidden frame, like a real estimator's error would be.
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &clouds {
            for p in &c.points {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        if clouds.iter().any(|c| c.is_empty()) {
            return Err(PipelineError::Stereo("a view produced no points".into()));
        }
        let diag = (hi - lo).norm();
        let sigma = self.noise_sigma_frac * diag;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for cloud in &mut clouds {
            for p in &mut cloud.points {
                if sigma > 0.0 {
                    for k in 0..3 {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        p[k] += sigma * g;
                    }
                }
                if self.outlier_frac > 0.0 && rng.random::<f64>() < self.outlier_frac {
                    *p = Point3::new(
                        rng.random_range(lo.x..=hi.x),
                        rng.random_range(lo.y..=hi.y),
                        rng.random_range(lo.z..=hi.z),
                    );
                }
            }
        }
        Ok(StereoEstimate { clouds })
    }
}

/// Reads pre-computed point maps from PLY files, one per view, for use with
/// any external stereo tool.
pub struct PlyStereo {
    pub paths: Vec<std::path::PathBuf>,
}

impl StereoEstimator for PlyStereo {
    fn estimate_pointmaps(&self, views: &[StereoView]) -> Result<StereoEstimate> {
        if views.len() < 2 {
            return Err(PipelineError::Stereo(format!(
                "need at least 2 images, got {}",
                views.len()
            )));
        }
        if self.paths.len() != views.len() {
            return Err(PipelineError::Stereo(format!(
                "{} point-map files for {} views",
                self.paths.len(),
                views.len()
            )));
        }
        let clouds = self
            .paths
            .iter()
            .map(|p| mesh4d_core::io::load_cloud_ply(p).map_err(PipelineError::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(StereoEstimate { clouds })
    }
}
