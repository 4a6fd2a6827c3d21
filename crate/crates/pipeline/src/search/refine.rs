use mesh4d_core::{
    mask_discrepancy, render_silhouette_aa, CameraIntrinsics, CameraPose, Mesh,
};
use nalgebra::Point3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

use super::sample::PITCH_LIMIT;
use super::score::ReferenceFrame;
use super::SearchConfig;

#[derive(Debug, Clone, Serialize, Default)]
pub struct RefineInfo {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Set when the starting render had no coverage anywhere, leaving the
    /// mask loss flat; the input pose is returned unchanged.
    pub no_gradient: bool,
    pub accepted_steps: usize,
}

fn pose_params(p: &CameraPose) -> [f64; 6] {
    [p.yaw, p.pitch, p.radius, p.lookat.x, p.lookat.y, p.lookat.z]
}

fn params_pose(x: &[f64; 6], cfg: &SearchConfig) -> CameraPose {
    CameraPose {
        yaw: x[0].rem_euclid(std::f64::consts::TAU),
        pitch: x[1].clamp(-PITCH_LIMIT, PITCH_LIMIT),
        radius: x[2].clamp(cfg.radius_range[0], cfg.radius_range[1]),
        lookat: Point3::new(
            x[3].clamp(cfg.lookat_range[0], cfg.lookat_range[1]),
            x[4].clamp(cfg.lookat_range[0], cfg.lookat_range[1]),
            x[5].clamp(cfg.lookat_range[0], cfg.lookat_range[1]),
        ),
    }
}

/// Mask-MSE gradient descent over the 6 pose parameters.
///
/// The loss is the mean squared difference between the antialiased render
/// silhouette and the reference mask; gradients come from central finite
/// differences, the step size halves on non-decrease, and the returned pose
/// never has a higher loss than the input.
pub fn refine_pose_sgd(
    mesh: &Mesh,
    reference: &ReferenceFrame,
    init: &CameraPose,
    cfg: &SearchConfig,
    intr: &CameraIntrinsics,
) -> Result<(CameraPose, RefineInfo)> {
    init.validate()?;
    let loss_of = |x: &[f64; 6]| -> Result<f64> {
        let pose = params_pose(x, cfg);
        let sil = render_silhouette_aa(mesh, &pose, intr)?;
        Ok(mask_discrepancy(&sil, &reference.silhouette)?.mse)
    };

    let mut x = pose_params(init);
    let mut current = loss_of(&x)?;
    let mut info = RefineInfo {
        initial_loss: current,
        final_loss: current,
        ..Default::default()
    };

    // Flat-loss guard: an empty render sees no boundary anywhere.
    let start_sil = render_silhouette_aa(mesh, &params_pose(&x, cfg), intr)?;
    if start_sil.is_empty_mask() {
        info.no_gradient = true;
        return Ok((*init, info));
    }

    let l_span = cfg.lookat_range[1] - cfg.lookat_range[0];
    let eps = [
        2e-3,
        2e-3,
        1e-3 * (cfg.radius_range[1] - cfg.radius_range[0]),
        1e-3 * l_span,
        1e-3 * l_span,
        1e-3 * l_span,
    ];
    // Characteristic scales normalize the step direction across parameters.
    let scale = [
        1.0,
        1.0,
        (cfg.radius_range[1] - cfg.radius_range[0]) / std::f64::consts::TAU,
        l_span / std::f64::consts::TAU,
        l_span / std::f64::consts::TAU,
        l_span / std::f64::consts::TAU,
    ];

    let mut lr = 0.02;
    for _ in 0..cfg.refine_iterations {
        // Central differences over the 6 parameters; evaluations are
        // independent so they may run concurrently.
        let probes: Vec<[f64; 6]> = (0..12)
            .map(|j| {
                let k = j / 2;
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                let mut p = x;
                p[k] += sgn * eps[k];
                p
            })
            .collect();
        let losses: Vec<f64> = probes
            .par_iter()
            .map(|p| loss_of(p))
            .collect::<Result<_>>()?;
        let mut grad = [0.0f64; 6];
        for k in 0..6 {
            grad[k] = (losses[2 * k] - losses[2 * k + 1]) / (2.0 * eps[k]);
        }
        let mut norm = 0.0;
        for k in 0..6 {
            let g = grad[k] * scale[k];
            norm += g * g;
        }
        let norm = norm.sqrt();
        if norm < 1e-18 {
            break;
        }
        let mut candidate = x;
        for k in 0..6 {
            candidate[k] -= lr * scale[k] * (grad[k] * scale[k]) / norm;
        }
        let cand_loss = loss_of(&candidate)?;
        if cand_loss < current {
            x = candidate;
            current = cand_loss;
            info.accepted_steps += 1;
            lr = (lr * 1.15).min(0.1);
        } else {
            lr *= 0.5;
            if lr < 1e-8 {
                break;
            }
        }
    }
    info.final_loss = current;
    debug_assert!(info.final_loss <= info.initial_loss);
    Ok((params_pose(&x, cfg), info))
}
