use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Camera-search budget and score weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Large-scale pose samples drawn before anything else (P₀).
    pub initial_samples: usize,
    /// Number of best-scoring renders handed to the stereo estimator.
    pub top_n_for_stereo: usize,
    /// PSO particle count (top K samples plus the stereo seed).
    pub swarm_size: usize,
    pub pso_iterations: usize,
    /// Gradient-descent refinement steps after PSO.
    pub refine_iterations: usize,
    pub radius_range: [f64; 2],
    /// Per-axis lookat sampling range.
    pub lookat_range: [f64; 2],
    pub weight_similarity: f64,
    pub weight_mask_area: f64,
    pub pso_inertia: f64,
    pub pso_cognitive: f64,
    pub pso_social: f64,
    /// Uniform jitter half-width as a fraction of each parameter range.
    pub pso_jitter_frac: f64,
    /// Reference-cloud subsample used for the stereo extrinsic fit.
    pub stereo_fit_points: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            initial_samples: 2000,
            top_n_for_stereo: 7,
            swarm_size: 200,
            pso_iterations: 25,
            refine_iterations: 300,
            radius_range: [1.0, 5.0],
            lookat_range: [-1.0, 1.0],
            weight_similarity: 1.0,
            weight_mask_area: 0.1,
            pso_inertia: 0.72,
            pso_cognitive: 1.49,
            pso_social: 1.49,
            pso_jitter_frac: 0.02,
            stereo_fit_points: 2000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(PipelineError::InvalidConfig("swarm_size must be >= 2".into()));
        }
        if self.initial_samples < self.swarm_size {
            return Err(PipelineError::InvalidConfig(
                "initial_samples must be >= swarm_size".into(),
            ));
        }
        if self.top_n_for_stereo == 0
            || self.pso_iterations == 0
            || self.refine_iterations == 0
            || self.stereo_fit_points == 0
        {
            return Err(PipelineError::InvalidConfig("all counts must be >= 1".into()));
        }
        if !(self.radius_range[0] > 0.0 && self.radius_range[1] > self.radius_range[0]) {
            return Err(PipelineError::InvalidConfig(
                "radius_range must be positive and increasing".into(),
            ));
        }
        if self.lookat_range[1] < self.lookat_range[0] {
            return Err(PipelineError::InvalidConfig("lookat_range must be increasing".into()));
        }
        Ok(())
    }
}
