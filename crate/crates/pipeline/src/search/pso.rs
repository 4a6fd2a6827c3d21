use mesh4d_core::{CameraIntrinsics, CameraPose, Mesh};
use nalgebra::Point3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PipelineError, Result};

use super::sample::PITCH_LIMIT;
use super::score::{score_candidate_with, ReferenceFrame, SimilarityScorer};
use super::SearchConfig;

const DIMS: usize = 6;

/// Pose as a PSO state vector: [yaw, pitch, radius, lookat x, y, z].
#[derive(Clone, Copy, Debug)]
struct PoseVec([f64; DIMS]);

impl PoseVec {
    fn from_pose(p: &CameraPose) -> Self {
        PoseVec([p.yaw, p.pitch, p.radius, p.lookat.x, p.lookat.y, p.lookat.z])
    }

    fn to_pose(self) -> CameraPose {
        CameraPose {
            yaw: self.0[0],
            pitch: self.0[1],
            radius: self.0[2],
            lookat: Point3::new(self.0[3], self.0[4], self.0[5]),
        }
    }
}

fn wrap_to_pi(a: f64) -> f64 {
    let mut x = a % std::f64::consts::TAU;
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    } else if x < -std::f64::consts::PI {
        x += std::f64::consts::TAU;
    }
    x
}

/// Difference `to − from` per dimension, circular in yaw.
fn pose_delta(to: &PoseVec, from: &PoseVec) -> [f64; DIMS] {
    let mut d = [0.0; DIMS];
    for k in 0..DIMS {
        d[k] = to.0[k] - from.0[k];
    }
    d[0] = wrap_to_pi(d[0]);
    d
}

fn clamp_into(cfg: &SearchConfig, x: &mut PoseVec) {
    x.0[0] = x.0[0].rem_euclid(std::f64::consts::TAU);
    x.0[1] = x.0[1].clamp(-PITCH_LIMIT, PITCH_LIMIT);
    x.0[2] = x.0[2].clamp(cfg.radius_range[0], cfg.radius_range[1]);
    for k in 3..6 {
        x.0[k] = x.0[k].clamp(cfg.lookat_range[0], cfg.lookat_range[1]);
    }
}

fn parameter_ranges(cfg: &SearchConfig) -> [f64; DIMS] {
    let l = cfg.lookat_range[1] - cfg.lookat_range[0];
    [
        std::f64::consts::TAU,
        2.0 * PITCH_LIMIT,
        cfg.radius_range[1] - cfg.radius_range[0],
        l,
        l,
        l,
    ]
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct PsoTrace {
    /// Best score of the swarm after each iteration (non-increasing).
    pub best_per_iteration: Vec<f64>,
    pub initial_best: f64,
    pub final_best: f64,
}

/// Standard particle swarm over the 6-parameter pose space: inertia,
/// cognitive and social pulls, plus uniform jitter. Yaw wraps modulo 2π,
/// the rest clamp to the sampling ranges. Deterministic under `seed`.
pub fn pso_search(
    mesh: &Mesh,
    reference: &ReferenceFrame,
    seeds: &[CameraPose],
    cfg: &SearchConfig,
    intr: &CameraIntrinsics,
    scorer: &dyn SimilarityScorer,
    seed: u64,
) -> Result<(CameraPose, PsoTrace)> {
    if seeds.is_empty() {
        return Err(PipelineError::InvalidConfig("PSO seed set is empty".into()));
    }
    let n = seeds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranges = parameter_ranges(cfg);

    let evaluate = |positions: &[PoseVec]| -> Result<Vec<f64>> {
        positions
            .par_iter()
            .map(|x| {
                score_candidate_with(mesh, None, &x.to_pose(), reference, intr, cfg, scorer)
            })
            .collect()
    };

    let mut positions: Vec<PoseVec> = seeds.iter().map(PoseVec::from_pose).collect();
    for x in &mut positions {
        clamp_into(cfg, x);
    }
    let mut velocities = vec![[0.0f64; DIMS]; n];
    let mut scores = evaluate(&positions)?;
    let mut best_positions = positions.clone();
    let mut best_scores = scores.clone();

    let argmin = |s: &[f64]| -> usize {
        let mut bi = 0;
        for i in 1..s.len() {
            if s[i] < s[bi] {
                bi = i;
            }
        }
        bi
    };
    let mut g_idx = argmin(&scores);
    let mut g_pos = positions[g_idx];
    let mut g_score = scores[g_idx];

    let mut trace = PsoTrace {
        initial_best: g_score,
        ..Default::default()
    };

    for _ in 0..cfg.pso_iterations {
        // Draw all randomness up front so evaluation order cannot matter.
        let mut draws = vec![[0.0f64; DIMS * 3]; n];
        for d in &mut draws {
            for v in d.iter_mut() {
                *v = rng.random::<f64>();
            }
        }
        for i in 0..n {
            let to_pbest = pose_delta(&best_positions[i], &positions[i]);
            let to_gbest = pose_delta(&g_pos, &positions[i]);
            for k in 0..DIMS {
                let r1 = draws[i][k];
                let r2 = draws[i][DIMS + k];
                let jitter = (draws[i][2 * DIMS + k] * 2.0 - 1.0)
                    * cfg.pso_jitter_frac
                    * ranges[k];
                velocities[i][k] = cfg.pso_inertia * velocities[i][k]
                    + cfg.pso_cognitive * r1 * to_pbest[k]
                    + cfg.pso_social * r2 * to_gbest[k]
                    + jitter;
                positions[i].0[k] += velocities[i][k];
            }
            clamp_into(cfg, &mut positions[i]);
        }
        scores = evaluate(&positions)?;
        for i in 0..n {
            if scores[i] < best_scores[i] {
                best_scores[i] = scores[i];
                best_positions[i] = positions[i];
            }
        }
        let bi = argmin(&best_scores);
        if best_scores[bi] < g_score {
            g_score = best_scores[bi];
            g_pos = best_positions[bi];
            g_idx = bi;
        }
        debug_assert!(
            trace
                .best_per_iteration
                .last()
                .map_or(true, |&prev| g_score <= prev),
            "PSO global best must be non-increasing"
        );
        trace.best_per_iteration.push(g_score);
    }
    let _ = g_idx;
    trace.final_best = g_score;
    Ok((g_pos.to_pose(), trace))
}
