//! Similarity alignment of predicted point clouds onto ground-truth clouds
//! by gradient descent on summed Chamfer distance.

use mesh4d_core::{
    nearest_rotation, rotation_from_axis_angle, KdTree3, PointCloud, SimilarityTransform,
};
use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub iterations: usize,
    /// Fraction of points kept from each cloud (outlier thinning + speed).
    pub keep_fraction: f64,
    /// Iteration at which the 180°-about-up flip candidate is tested.
    pub flip_at: usize,
    /// Trimmed Chamfer: over the final `trim_last` iterations, drop the
    /// worst `trim_fraction` residuals from each direction.
    pub trimmed: bool,
    pub trim_last: usize,
    pub trim_fraction: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            iterations: 2000,
            keep_fraction: 0.05,
            flip_at: 1000,
            trimmed: true,
            trim_last: 200,
            trim_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct AlignTrace {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub flip_applied: bool,
    pub accepted_steps: usize,
}

struct PairData {
    pred: Vec<Point3<f64>>,
    gt: Vec<Point3<f64>>,
    gt_tree: KdTree3,
    pred_tree: KdTree3,
}

struct State {
    rotation: Matrix3<f64>,
    log_scale: f64,
    translation: Vector3<f64>,
}

impl State {
    fn transform(&self) -> SimilarityTransform {
        SimilarityTransform {
            rotation: self.rotation,
            scale: self.log_scale.exp(),
            translation: self.translation,
        }
    }
}

/// Summed two-direction Chamfer across view pairs for transform T, optionally
/// trimmed. Returns the loss.
fn chamfer_loss(pairs: &[PairData], t: &SimilarityTransform, trim: Option<f64>) -> f64 {
    let inv = t.inverse();
    let s2 = t.scale * t.scale;
    let mut total = 0.0;
    for pair in pairs {
        let mut fwd: Vec<f64> = pair
            .pred
            .iter()
            .map(|p| {
                let tp = t.apply_point(p);
                pair.gt_tree.nearest(&tp).expect("non-empty").1
            })
            .collect();
        // min_q ‖g − T q‖² = s² · min_q ‖T⁻¹ g − q‖²
        let mut bwd: Vec<f64> = pair
            .gt
            .iter()
            .map(|g| {
                let ig = inv.apply_point(g);
                s2 * pair.pred_tree.nearest(&ig).expect("non-empty").1
            })
            .collect();
        if let Some(frac) = trim {
            for v in [&mut fwd, &mut bwd] {
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let keep = ((v.len() as f64 * (1.0 - frac)).ceil() as usize).max(1);
                v.truncate(keep);
            }
        }
        total += fwd.iter().sum::<f64>() / fwd.len() as f64;
        total += bwd.iter().sum::<f64>() / bwd.len() as f64;
    }
    total
}

/// Gradient of the (optionally trimmed) loss w.r.t. (ω, log s, t) with
/// nearest-neighbor correspondences held fixed at the current transform.
fn chamfer_gradient(
    pairs: &[PairData],
    t: &SimilarityTransform,
    trim: Option<f64>,
) -> (Vector3<f64>, f64, Vector3<f64>) {
    let inv = t.inverse();
    let mut g_rot = Vector3::zeros();
    let mut g_log_s = 0.0;
    let mut g_t = Vector3::zeros();
    for pair in pairs {
        // forward: residual r = T p − g*
        let mut fwd: Vec<(f64, Vector3<f64>, Vector3<f64>)> = pair
            .pred
            .iter()
            .map(|p| {
                let tp = t.apply_point(p);
                let (gi, d2) = pair.gt_tree.nearest(&tp).expect("non-empty");
                let r = tp - pair.gt[gi];
                let u = tp.coords - t.translation;
                (d2, r, u)
            })
            .collect();
        let mut bwd: Vec<(f64, Vector3<f64>, Vector3<f64>)> = pair
            .gt
            .iter()
            .map(|g| {
                let ig = inv.apply_point(g);
                let (pi, _) = pair.pred_tree.nearest(&ig).expect("non-empty");
                let tq = t.apply_point(&pair.pred[pi]);
                let r = g.coords - tq.coords;
                let u = tq.coords - t.translation;
                let d2 = r.norm_squared();
                (d2, r, u)
            })
            .collect();
        if let Some(frac) = trim {
            for v in [&mut fwd, &mut bwd] {
                v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let keep = ((v.len() as f64 * (1.0 - frac)).ceil() as usize).max(1);
                v.truncate(keep);
            }
        }
        let nf = fwd.len() as f64;
        for (_, r, u) in &fwd {
            g_t += 2.0 * r / nf;
            g_log_s += 2.0 * r.dot(u) / nf;
            g_rot += 2.0 * u.cross(r) / nf;
        }
        let nb = bwd.len() as f64;
        for (_, r, u) in &bwd {
            // d‖g − Tq‖²/dθ = −2 r·d(Tq)/dθ
            g_t -= 2.0 * r / nb;
            g_log_s -= 2.0 * r.dot(u) / nb;
            g_rot -= 2.0 * u.cross(r) / nb;
        }
    }
    (g_rot, g_log_s, g_t)
}

fn subsample(cloud: &PointCloud, keep_fraction: f64, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    let n = cloud.points.len();
    let keep = ((n as f64 * keep_fraction).ceil() as usize).max(64).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(keep);
    idx.sort_unstable();
    idx.iter().map(|&i| cloud.points[i]).collect()
}

/// Fit the similarity transform mapping `predicted` clouds onto `gt` clouds.
///
/// Both sets are subsampled to `keep_fraction` (deterministic under `seed`),
/// then (R as axis-angle increments, log-scale, translation) descends the
/// summed Chamfer distance with backtracking steps. At `flip_at` the
/// candidate flipped 180° about world-up (through the target centroid) is
/// evaluated and kept if it scores lower.
pub fn align_to_world(
    predicted: &[PointCloud],
    gt: &[PointCloud],
    params: &AlignParams,
    seed: u64,
) -> Result<(SimilarityTransform, AlignTrace)> {
    if predicted.len() != gt.len() || predicted.is_empty() {
        return Err(PipelineError::InvalidConfig(format!(
            "cloud count mismatch: {} predicted vs {} ground truth",
            predicted.len(),
            gt.len()
        )));
    }
    if predicted.iter().chain(gt.iter()).any(|c| c.is_empty()) {
        return Err(PipelineError::Geometry(
            mesh4d_core::GeometryError::EmptyPointCloud,
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<PairData> = predicted
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let pred = subsample(p, params.keep_fraction, &mut rng);
            let gtp = subsample(g, params.keep_fraction, &mut rng);
            let gt_tree = KdTree3::build(&gtp);
            let pred_tree = KdTree3::build(&pred);
            PairData {
                pred,
                gt: gtp,
                gt_tree,
                pred_tree,
            }
        })
        .collect();

    // Centroid/extent initialization.
    let centroid = |pts: &mut dyn Iterator<Item = &Point3<f64>>| -> (Vector3<f64>, f64, usize) {
        let mut c = Vector3::zeros();
        let mut n = 0usize;
        let mut pts2 = Vec::new();
        for p in pts {
            c += p.coords;
            n += 1;
            pts2.push(*p);
        }
        c /= n as f64;
        let spread = (pts2.iter().map(|p| (p.coords - c).norm_squared()).sum::<f64>()
            / n as f64)
            .sqrt();
        (c, spread, n)
    };
    let (c_pred, s_pred, _) = centroid(&mut pairs.iter().flat_map(|p| p.pred.iter()));
    let (c_gt, s_gt, _) = centroid(&mut pairs.iter().flat_map(|p| p.gt.iter()));
    let init_scale = if s_pred > 1e-12 { s_gt / s_pred } else { 1.0 };
    let mut state = State {
        rotation: Matrix3::identity(),
        log_scale: init_scale.max(1e-6).ln(),
        translation: c_gt - init_scale * c_pred,
    };
    let gt_diag = {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pairs.iter().flat_map(|p| p.gt.iter()) {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi - lo).norm().max(1e-9)
    };
    let rho = (gt_diag / 2.0).max(1e-6);

    let trim_of = |iter: usize| -> Option<f64> {
        if params.trimmed && iter + params.trim_last >= params.iterations {
            Some(params.trim_fraction)
        } else {
            None
        }
    };

    let mut current = chamfer_loss(&pairs, &state.transform(), trim_of(0));
    let mut trace = AlignTrace {
        initial_loss: current,
        ..Default::default()
    };
    let mut lr = 0.05 * rho;
    for iter in 0..params.iterations {
        let trim = trim_of(iter);
        if iter > 0 && trim_of(iter - 1) != trim {
            // objective definition changes when trimming kicks in
            current = chamfer_loss(&pairs, &state.transform(), trim);
        }
        if iter == params.flip_at {
            // Flip 180° about world-up through the target centroid.
            let flip = rotation_from_axis_angle(&Vector3::new(
                0.0,
                std::f64::consts::PI,
                0.0,
            ));
            let t = state.transform();
            let flipped = SimilarityTransform {
                rotation: flip * t.rotation,
                scale: t.scale,
                translation: flip * (t.translation - c_gt) + c_gt,
            };
            let flipped_loss = chamfer_loss(&pairs, &flipped, trim);
            if flipped_loss < current {
                state.rotation = flipped.rotation;
                state.translation = flipped.translation;
                current = flipped_loss;
                trace.flip_applied = true;
            }
        }
        let (g_rot, g_log_s, g_t) = chamfer_gradient(&pairs, &state.transform(), trim);
        // Normalize in displacement units: a rotation of δω moves points by
        // about ρ·δω, log-scale likewise, translation directly.
        let v_rot = g_rot / rho;
        let v_s = g_log_s / rho;
        let norm = (v_rot.norm_squared() + v_s * v_s + g_t.norm_squared()).sqrt();
        if norm < 1e-16 {
            continue;
        }
        let mut accepted = false;
        for _ in 0..8 {
            let step_rot = -(lr / rho) * v_rot / norm;
            let step_log_s = -(lr / rho) * v_s / norm;
            let step_t = -lr * g_t / norm;
            let cand = State {
                rotation: nearest_rotation(&(rotation_from_axis_angle(&step_rot) * state.rotation)),
                log_scale: state.log_scale + step_log_s,
                translation: state.translation + step_t,
            };
            let cand_loss = chamfer_loss(&pairs, &cand.transform(), trim);
            if cand_loss < current {
                state = cand;
                current = cand_loss;
                lr = (lr * 1.2).min(0.5 * rho);
                trace.accepted_steps += 1;
                accepted = true;
                break;
            }
            lr *= 0.5;
            if lr < 1e-12 * rho {
                break;
            }
        }
        if !accepted && lr < 1e-12 * rho {
            lr = 1e-4 * rho; // step-size restart near convergence
        }
    }
    trace.final_loss = current;
    let out = state.transform();
    out.validate()
        .map_err(|e| PipelineError::Divergence(format!("alignment produced invalid transform: {e}")))?;
    Ok((out, trace))
}
